use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{ClassTag, Literal, Type};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObjData {
    Text(String),
    Ints(Vec<i64>),
    Reals(Vec<f64>),
}

/// Instance of a built-in class. Objects have value semantics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Object {
    pub class: ClassTag,
    pub data: ObjData,
}

impl Object {
    pub fn string(s: impl Into<String>) -> Self {
        Self { class: ClassTag::String, data: ObjData::Text(s.into()) }
    }

    pub fn builder(s: impl Into<String>) -> Self {
        Self { class: ClassTag::Builder, data: ObjData::Text(s.into()) }
    }

    pub fn text(&self) -> Option<&str> {
        match &self.data {
            ObjData::Text(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    Null,
    Obj(Object),
}

impl Value {
    pub fn str(s: impl Into<String>) -> Self {
        Value::Obj(Object::string(s))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Real(v) => Some(*v),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Real(_) => "real",
            Value::Null => "null",
            Value::Obj(o) => o.class.name(),
        }
    }

    /// Converts the value for storage in a slot of type `ty`, widening ints
    /// to reals and int arrays to real arrays. `None` on a type mismatch.
    pub fn coerce(self, ty: Type) -> Option<Value> {
        match (ty, self) {
            (Type::Class(ClassTag::RealArray), Value::Obj(Object { class: ClassTag::IntArray, data: ObjData::Ints(v) })) => {
                Some(Value::Obj(Object { class: ClassTag::RealArray, data: ObjData::Reals(v.into_iter().map(|x| x as f64).collect()) }))
            }
            (Type::Bool, v @ Value::Bool(_)) => Some(v),
            (Type::Int, v @ Value::Int(_)) => Some(v),
            (Type::Real, Value::Int(i)) => Some(Value::Real(i as f64)),
            (Type::Real, v @ Value::Real(_)) => Some(v),
            (Type::Class(_), Value::Null) => Some(Value::Null),
            (Type::Class(c), Value::Obj(o)) if o.class == c => Some(Value::Obj(o)),
            _ => None,
        }
    }

    pub fn from_literal(lit: &Literal) -> Value {
        match lit {
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Int(v) => Value::Int(*v),
            Literal::Real(v) => Value::Real(*v),
            Literal::Char(c) => Value::Int(*c as i64),
            Literal::Str(s) => Value::str(s.clone()),
            Literal::Null => Value::Null,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v:?}"),
            Value::Null => f.write_str("null"),
            Value::Obj(o) => match &o.data {
                ObjData::Text(s) if o.class == ClassTag::String => write!(f, "{s:?}"),
                ObjData::Text(s) => write!(f, "new Builder({s:?})"),
                ObjData::Ints(v) => {
                    let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    write!(f, "[{}]", items.join(", "))
                }
                ObjData::Reals(v) => {
                    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                    write!(f, "[{}]", items.join(", "))
                }
            },
        }
    }
}

/// Argumentless, side-effect free methods with a primitive result.
pub fn state_queries(class: ClassTag) -> &'static [(&'static str, Type)] {
    match class {
        ClassTag::String | ClassTag::Builder => &[("length", Type::Int), ("isEmpty", Type::Bool)],
        ClassTag::IntArray | ClassTag::RealArray => &[("size", Type::Int), ("isEmpty", Type::Bool)],
    }
}

/// Evaluates a registered state query. Total on every object of the class.
pub fn eval_state_query(obj: &Object, method: &str) -> Option<Value> {
    let len = match &obj.data {
        ObjData::Text(s) => s.chars().count(),
        ObjData::Ints(v) => v.len(),
        ObjData::Reals(v) => v.len(),
    };
    let known = state_queries(obj.class).iter().any(|(m, _)| *m == method);
    if !known {
        return None;
    }
    match method {
        "length" | "size" => Some(Value::Int(len as i64)),
        "isEmpty" => Some(Value::Bool(len == 0)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Value {
        Value::Obj(Object { class: ClassTag::IntArray, data: ObjData::Ints(v.to_vec()) })
    }

    #[test]
    fn ints_widen_to_reals() {
        assert_eq!(Value::Int(3).coerce(Type::Real), Some(Value::Real(3.0)));
        assert_eq!(Value::Real(1.5).coerce(Type::Int), None);
        let widened = ints(&[1, -2]).coerce(Type::Class(ClassTag::RealArray)).unwrap();
        assert_eq!(widened, Value::Obj(Object { class: ClassTag::RealArray, data: ObjData::Reals(vec![1.0, -2.0]) }));
    }

    #[test]
    fn null_fits_any_class_only() {
        assert_eq!(Value::Null.coerce(Type::Class(ClassTag::String)), Some(Value::Null));
        assert_eq!(Value::Null.coerce(Type::Int), None);
        assert_eq!(Value::str("a").coerce(Type::Class(ClassTag::Builder)), None);
    }

    #[test]
    fn char_literals_are_codes() {
        assert_eq!(Value::from_literal(&Literal::Char('a')), Value::Int(97));
        assert_eq!(Value::from_literal(&Literal::Char('é')), Value::Int(233));
    }

    #[test]
    fn state_queries_count_characters() {
        let s = Object::string("héllo");
        assert_eq!(eval_state_query(&s, "length"), Some(Value::Int(5)));
        assert_eq!(eval_state_query(&s, "isEmpty"), Some(Value::Bool(false)));
        assert_eq!(eval_state_query(&s, "size"), None);
        let Value::Obj(empty) = ints(&[]) else { unreachable!() };
        assert_eq!(eval_state_query(&empty, "size"), Some(Value::Int(0)));
        assert_eq!(eval_state_query(&empty, "isEmpty"), Some(Value::Bool(true)));
        assert_eq!(eval_state_query(&empty, "length"), None);
    }

    #[test]
    fn display_forms() {
        assert_eq!(Value::Real(2.0).to_string(), "2.0");
        assert_eq!(Value::str("a\"b").to_string(), "\"a\\\"b\"");
        assert_eq!(Value::Obj(Object::builder("x")).to_string(), "new Builder(\"x\")");
        assert_eq!(ints(&[1, 2]).to_string(), "[1, 2]");
    }
}
