//! Template instantiation, surface realization and the inverse parser.

pub mod instantiate;
pub mod parse;
pub mod render;
pub mod synonyms;
pub mod template;

pub use instantiate::{check_non_degenerate, instantiate, instantiate_with, random_program, template_fits};
pub use parse::parse_question;
pub use render::{render_text, Binding};
pub use synonyms::SynonymTable;
pub use template::{all_templates, Template};
