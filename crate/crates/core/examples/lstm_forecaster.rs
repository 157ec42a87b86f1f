//! Trains a small LSTM on a noisy sine with plain SGD and checks one
//! gradient against central finite differences.
//!
//!     cargo run --release --example lstm_forecaster

use fairfed::lstm::{
    backward, init_params, mse_loss, sgd_epochs, unflatten, ModelShape, TrainConfig,
};
use fairfed::trace::make_windows;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series: Vec<f64> = (0..600)
        .map(|t| (t as f64 * 0.21).sin() + 0.05 * (t as f64 * 1.7).cos())
        .collect();
    let patterns = make_windows(&series, 12)?;
    let (train, test) = patterns.split_at(480);

    let shape = ModelShape::new(vec![8]);
    println!("{shape}: {} parameters", shape.param_count());
    let mut params = init_params(&shape, 5)?;
    let config = TrainConfig {
        learning_rate: 0.05,
        batch_size: 16,
        ..TrainConfig::default()
    };
    for epoch in 1..=15 {
        let seeded = TrainConfig {
            seed: epoch,
            ..config.clone()
        };
        let (next, train_loss) = sgd_epochs(&params, train, &seeded)?;
        params = next;
        if epoch % 5 == 0 {
            println!(
                "epoch {epoch:>2}: train MSE {train_loss:.5}, test MSE {:.5}",
                mse_loss(&params, test)?
            );
        }
    }

    let batch = &test[..8];
    let analytic = backward(&params, batch)?;
    let base = params.flatten();
    let (i, h) = (base.len() / 2, 1e-5);
    let mut plus = base.clone();
    plus.values[i] += h;
    let mut minus = base.clone();
    minus.values[i] -= h;
    let numeric = (mse_loss(&unflatten(&plus, &shape)?, batch)?
        - mse_loss(&unflatten(&minus, &shape)?, batch)?)
        / (2.0 * h);
    println!(
        "dL/dw[{i}]: backprop {:.8e}, finite difference {numeric:.8e}",
        analytic.values[i]
    );
    Ok(())
}
