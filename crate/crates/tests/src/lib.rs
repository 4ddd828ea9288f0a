//! Holds the `acceptance` test target, which runs every criterion of
//! [`fkg::selftest`] and prints one line per criterion.
