//! Tagged-node JSON form of formulas: `{"op":"U","lhs":…,"rhs":…}`,
//! `{"op":"F","arg":…}`, atoms `{"op":"ap","name":"a"}`.

use serde_json::{json, Map, Value};

use super::{AlphabetContext, Formula, LtlError};

pub fn to_json(f: &Formula) -> Value {
    use Formula::*;
    let bin = |op: &str, a: &Formula, b: &Formula| json!({"op": op, "lhs": to_json(a), "rhs": to_json(b)});
    let un = |op: &str, a: &Formula| json!({"op": op, "arg": to_json(a)});
    match f {
        True => json!({"op": "true"}),
        False => json!({"op": "false"}),
        Atom(p) => json!({"op": "ap", "name": p.name()}),
        Not(a) => un("!", a),
        Next(a) => un("X", a),
        Eventually(a) => un("F", a),
        Always(a) => un("G", a),
        And(a, b) => bin("&", a, b),
        Or(a, b) => bin("|", a, b),
        Until(a, b) => bin("U", a, b),
        Release(a, b) => bin("R", a, b),
    }
}

pub fn from_json(v: &Value, ctx: &mut AlphabetContext) -> Result<Formula, LtlError> {
    let obj = v
        .as_object()
        .ok_or_else(|| LtlError::Json("formula node must be an object".into()))?;
    let op = obj
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| LtlError::Json("missing `op`".into()))?;
    let child = |key: &str, ctx: &mut AlphabetContext| -> Result<Formula, LtlError> {
        let c = field(obj, key, op)?;
        from_json(c, ctx)
    };
    Ok(match op {
        "true" => Formula::True,
        "false" => Formula::False,
        "ap" => {
            let name = field(obj, "name", op)?
                .as_str()
                .ok_or_else(|| LtlError::Json("`name` must be a string".into()))?;
            Formula::Atom(ctx.intern(name)?)
        }
        "!" => Formula::not(child("arg", ctx)?),
        "X" => Formula::next(child("arg", ctx)?),
        "F" => Formula::eventually(child("arg", ctx)?),
        "G" => Formula::always(child("arg", ctx)?),
        "&" | "|" | "U" | "R" => {
            let l = child("lhs", ctx)?;
            let r = child("rhs", ctx)?;
            match op {
                "&" => Formula::and(l, r),
                "|" => Formula::or(l, r),
                "U" => Formula::until(l, r),
                _ => Formula::release(l, r),
            }
        }
        other => return Err(LtlError::Json(format!("unknown op `{other}`"))),
    })
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, op: &str) -> Result<&'a Value, LtlError> {
    obj.get(key)
        .ok_or_else(|| LtlError::Json(format!("`{op}` node missing `{key}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse;

    #[test]
    fn until_node_shape() {
        let mut ctx = AlphabetContext::new();
        let f = parse("!a U b", &mut ctx).unwrap();
        let v = to_json(&f);
        assert_eq!(
            v,
            json!({"op":"U","lhs":{"op":"!","arg":{"op":"ap","name":"a"}},"rhs":{"op":"ap","name":"b"}})
        );
        assert_eq!(from_json(&v, &mut ctx).unwrap(), f);
    }

    #[test]
    fn rejects_unknown_op() {
        let mut ctx = AlphabetContext::new();
        assert!(from_json(&json!({"op":"W"}), &mut ctx).is_err());
        assert!(from_json(&json!({"op":"U","lhs":{"op":"true"}}), &mut ctx).is_err());
    }
}
