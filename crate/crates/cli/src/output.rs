use serde::ser::{Serialize, SerializeMap, Serializer};
use serde_json::value::RawValue;

/// A float written with 17 significant digits; non-finite values become `null`.
#[derive(Debug, Clone, Copy)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        RawValue::from_string(format!("{:.16e}", self.0))
            .expect("scientific notation is valid JSON")
            .serialize(s)
    }
}

pub fn f17(x: f64) -> F17 {
    F17(x)
}

/// Label-keyed JSON object that keeps domain order.
pub struct LabelMap<'a, T>(Vec<(&'a str, T)>);

impl<'a, T> FromIterator<(&'a str, T)> for LabelMap<'a, T> {
    fn from_iter<I: IntoIterator<Item = (&'a str, T)>>(iter: I) -> Self {
        LabelMap(iter.into_iter().collect())
    }
}

impl<T: Serialize> Serialize for LabelMap<'_, T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}
