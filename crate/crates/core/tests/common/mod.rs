pub mod oracle;
pub mod profiles;
