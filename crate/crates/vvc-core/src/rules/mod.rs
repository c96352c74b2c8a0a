//! Rule language parsing and rulebase configuration loading.

mod config;
mod parse;

pub use config::{
    build_rulebase, load_rulebase_files, DeclarationFile, LoadError, LoadIssue,
    ReferenceDeclaration, Role, SetDeclaration, Shape, VariableDeclaration,
};
pub use parse::{format_rule, parse_rule_line, parse_rules_text, ParseError, ParsedRule};
