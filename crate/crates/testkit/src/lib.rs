//! Slow, direct reference implementations that the test suites compare the
//! production code against, plus scene generators shared by those suites.

pub mod gradcheck;
pub mod losses;
pub mod oracle;
pub mod scenes;
