use std::fmt;

use super::{Query, ResultForm, Selector};

/// Prints the query with absolute IRIs so it parses back without prefixes.
impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(out) = &self.register {
            writeln!(f, "REGISTER {out} AS")?;
        }
        match &self.form {
            ResultForm::Select(vars) => {
                f.write_str("SELECT")?;
                for v in vars {
                    write!(f, " {v}")?;
                }
                f.write_str("\n")?;
            }
            ResultForm::Construct(template) => {
                f.write_str("CONSTRUCT {\n")?;
                for row in template {
                    writeln!(f, "  {row} .")?;
                }
                f.write_str("}\n")?;
            }
        }
        f.write_str("WHERE {\n")?;
        for stream in &self.streams {
            let selector = match &stream.selector {
                Selector::Iri(i) => i.to_string(),
                Selector::Var(v) => v.to_string(),
            };
            writeln!(
                f,
                "  STREAM {selector} [RANGE {}ms ON {}] {{",
                stream.window.range_ms, stream.window.on
            )?;
            for p in &stream.patterns {
                writeln!(f, "    {p} .")?;
            }
            f.write_str("  }\n")?;
        }
        for p in &self.statics {
            writeln!(f, "  {p} .")?;
        }
        f.write_str("}\n")
    }
}

/// `prettyPrint` as a free function.
pub fn pretty_print(query: &Query) -> String {
    query.to_string()
}
