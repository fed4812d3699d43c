//! Sampled derivative bounds for built-in and expression-defined fields.

use wzlab::coefficients::{
    verify_assumptions, CoefficientField, ExpressionField, ExpressionFieldSpec, LinearField, ProbeBox,
    QuadraticDiffusion, ScalarGeometric, TrigField, TruncatedField,
};

fn show(field: &dyn CoefficientField) {
    let r = verify_assumptions(field, ProbeBox::new(100.0), 1000);
    println!(
        "{:<40} bounded = {:<5} |∇b| {:>9.3e}  max|∇σ| {:>9.3e}  flags {:?}",
        r.field,
        r.satisfied,
        r.outer.grad_b,
        r.outer.grad_sigma.iter().fold(0.0f64, |m, &x| m.max(x)),
        r.growth_flags
    );
}

fn main() -> wzlab::Result<()> {
    show(&ScalarGeometric::new(0.1, 0.5));
    show(&LinearField::non_commuting_2d(0.1, 0.5));
    show(&TrigField::new(3, 0.5, 0.3));
    show(&QuadraticDiffusion { c: 1.0 });
    show(&TruncatedField::new(QuadraticDiffusion { c: 1.0 }, 16.0)?);

    let spec = ExpressionFieldSpec {
        drift: vec!["x2".into(), "-sin(x1) - 0.2*x2".into()],
        diffusion: vec![vec!["0".into()], vec!["0.4*cos(x1)".into()]],
        ..ExpressionFieldSpec::default()
    };
    show(&ExpressionField::new(spec)?);
    Ok(())
}
