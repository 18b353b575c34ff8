pub mod oracle;
pub mod scenes;
