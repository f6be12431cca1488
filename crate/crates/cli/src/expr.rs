use std::sync::Arc;

use exmex::prelude::*;
use tdns_core::geometry::{FiniteDifferenceMap, SharedMap, Vec2};

/// Compiles `text` as a function of (a, b, t); `vars` names a and b.
fn compile(text: &str, vars: [&str; 2]) -> Result<impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static, String> {
    let ex = exmex::parse::<f64>(text).map_err(|e| format!("cannot parse `{text}`: {e}"))?;
    let mut slots = Vec::new();
    for name in ex.var_names() {
        let slot = match name.as_str() {
            n if n == vars[0] => 0,
            n if n == vars[1] => 1,
            "t" => 2,
            other => {
                return Err(format!(
                    "`{text}` uses unknown variable `{other}`; allowed: {}, {}, t",
                    vars[0], vars[1]
                ))
            }
        };
        slots.push(slot);
    }
    Ok(move |a: f64, b: f64, t: f64| {
        let all = [a, b, t];
        let args: Vec<f64> = slots.iter().map(|&s| all[s]).collect();
        ex.eval(&args).unwrap_or(f64::NAN)
    })
}

/// A map given by expressions for y(x, t) and x(y, t); derivatives by finite differences.
pub fn user_map(forward: &[String; 2], inverse: &[String; 2], horizon: f64) -> Result<SharedMap, String> {
    let f1 = compile(&forward[0], ["x1", "x2"])?;
    let f2 = compile(&forward[1], ["x1", "x2"])?;
    let i1 = compile(&inverse[0], ["y1", "y2"])?;
    let i2 = compile(&inverse[1], ["y1", "y2"])?;
    let fwd = Arc::new(move |x: Vec2, t: f64| Vec2::new(f1(x[0], x[1], t), f2(x[0], x[1], t)));
    let inv = Arc::new(move |y: Vec2, t: f64| Vec2::new(i1(y[0], y[1], t), i2(y[0], y[1], t)));
    let label = format!("user(y=({}, {}))", forward[0], forward[1]);
    Ok(Arc::new(FiniteDifferenceMap::new(label, fwd, inv, horizon)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variables_bind_by_name_not_order() {
        let f = compile("t*100 + x2*10 + x1", ["x1", "x2"]).unwrap();
        assert_eq!(f(1.0, 2.0, 3.0), 321.0);
        let g = compile("2", ["x1", "x2"]).unwrap();
        assert_eq!(g(5.0, 5.0, 5.0), 2.0);
    }

    #[test]
    fn rotation_by_expressions() {
        let map = user_map(
            &["cos(t)*x1 + sin(t)*x2".into(), "-sin(t)*x1 + cos(t)*x2".into()],
            &["cos(t)*y1 - sin(t)*y2".into(), "sin(t)*y1 + cos(t)*y2".into()],
            1.0,
        )
        .unwrap();
        let y = Vec2::new(0.3, 0.8);
        assert!((map.forward(map.inverse(y, 0.7), 0.7) - y).norm() < 1e-14);
        assert!((map.jac_inverse(y, 0.7).determinant() - 1.0).abs() < 1e-9);
    }
}
