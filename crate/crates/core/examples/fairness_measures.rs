//! Coefficient-of-variation fairness on per-client losses and per-connection
//! provisioning, as reported for q = 0 and q = 10.
//!
//!     cargo run --example fairness_measures

use fairfed::fairness::{cv_loss, cv_ou, cv_qos, improvement, jain_index};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let losses_q0 = [0.2776, 0.0558, 0.0950, 0.1746, 0.1889];
    let losses_q10 = [0.2313, 0.0673, 0.0952, 0.1943, 0.1991];
    let (a, b) = (cv_loss(&losses_q0)?, cv_loss(&losses_q10)?);
    println!(
        "CV loss:  q=0 {a:.2}  q=10 {b:.2}  improvement {:.1}%",
        improvement(a, b)?
    );
    println!(
        "Jain index of losses: q=0 {:.3}  q=10 {:.3}",
        jain_index(&losses_q0)?,
        jain_index(&losses_q10)?
    );

    let (u0, o0) = (
        [104.0, 54.0, 12.0, 53.0, 89.0],
        [75.0, 39.0, 36.0, 47.0, 182.0],
    );
    let (u10, o10) = (
        [108.0, 70.0, 13.0, 60.0, 107.0],
        [66.0, 39.0, 38.0, 49.0, 180.0],
    );
    let (a, b) = (cv_qos(&u0, &o0)?, cv_qos(&u10, &o10)?);
    println!(
        "CV QoS:   q=0 {a:.2}  q=10 {b:.2}  improvement {:.1}%",
        improvement(a, b)?
    );

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (cv_ou(mean(&u0), mean(&o0))?, cv_ou(mean(&u10), mean(&o10))?);
    println!(
        "CV(û,ô), reconstructed: q=0 {a:.2}  q=10 {b:.2}  improvement {:.1}%",
        improvement(a, b)?
    );
    Ok(())
}
