//! Hyperparameter sweep: a cartesian product of learner settings, each
//! cell trained once per experiment seed and ranked by the mean of its
//! final evaluation returns.

use crate::error::Result;
use crate::io::{Config, GridRow, GridSection};
use crate::learn::{CurvePoint, LearnerConfig};

/// Trains one run and returns its evaluation curve. Injected so the
/// sweep logic stays independent of which phase is being swept.
pub type CellRunner<'a> = dyn Fn(&LearnerConfig, u64) -> Result<Vec<CurvePoint>> + Sync + 'a;

/// One point of the sweep: the base learner with this cell's overrides
/// applied. The CSV columns are read back out of `learner`.
#[derive(Clone, Debug)]
pub struct GridCell {
    pub id: usize,
    pub learner: LearnerConfig,
}

#[derive(Clone, Debug)]
pub struct GridOutcome {
    /// Cell-major: every seed of cell 0, then every seed of cell 1, ...
    pub rows: Vec<GridRow>,
    /// Cell ids with their mean final return, best first. Cells with
    /// any crashed run carry a NaN mean and sort after every clean one.
    pub ranking: Vec<(usize, f64)>,
    /// Highest-ranked cell that completed all its seeds.
    pub best: Option<usize>,
}

/// Expands the sweep axes against a base learner. An empty axis leaves
/// the base value untouched, so an all-empty grid is the single base
/// cell. Axis order fixes the cell ids: alpha varies slowest, eta
/// fastest.
pub fn grid_cells(base: &LearnerConfig, grid: &GridSection) -> Vec<GridCell> {
    fn axis<T: Copy>(values: &[T], base: T) -> Vec<T> {
        if values.is_empty() {
            vec![base]
        } else {
            values.to_vec()
        }
    }

    let alphas = axis(&grid.alpha, base.learning_rate);
    let betas = axis(&grid.beta, base.value_scale);
    let lambdas = axis(&grid.lambda, base.lambda);
    let lambda_primes = axis(&grid.lambda_prime, base.lambda_value);
    let windows = axis(&grid.window, base.window);
    let sigma_inits: Vec<Option<f64>> = if grid.sigma_init.is_empty() {
        vec![base.sigma_init]
    } else {
        grid.sigma_init.iter().map(|&s| Some(s)).collect()
    };
    let etas = axis(&grid.eta, base.entropy_weight);

    let mut cells = Vec::new();
    for &alpha in &alphas {
        for &beta in &betas {
            for &lambda in &lambdas {
                for &lambda_prime in &lambda_primes {
                    for &window in &windows {
                        for &sigma_init in &sigma_inits {
                            for &eta in &etas {
                                let learner = LearnerConfig {
                                    learning_rate: alpha,
                                    value_scale: beta,
                                    lambda,
                                    lambda_value: lambda_prime,
                                    window,
                                    sigma_init,
                                    entropy_weight: eta,
                                    ..base.clone()
                                };
                                cells.push(GridCell { id: cells.len(), learner });
                            }
                        }
                    }
                }
            }
        }
    }
    cells
}

/// Runs every cell against every experiment seed. A crashed run is
/// recorded as a NaN row rather than aborting the sweep.
pub fn grid_search(cfg: &Config, runner: &CellRunner) -> Result<GridOutcome> {
    cfg.validate()?;
    let cells = grid_cells(&cfg.learner(), &cfg.experiment.grid);
    let seeds = &cfg.experiment.seeds;

    let mut rows = Vec::with_capacity(cells.len() * seeds.len());
    let mut means = Vec::with_capacity(cells.len());
    for cell in &cells {
        let l = &cell.learner;
        let mut total = 0.0;
        for &seed in seeds {
            let final_return = match runner(l, seed) {
                Ok(curve) => curve.last().map_or(f64::NAN, |p| p.mean_return),
                Err(_) => f64::NAN,
            };
            total += final_return;
            rows.push(GridRow {
                cell_id: cell.id,
                alpha: l.learning_rate,
                beta: l.value_scale,
                lambda: l.lambda,
                lambda_prime: l.lambda_value,
                window: l.window,
                seed,
                final_return,
            });
        }
        means.push((cell.id, total / seeds.len() as f64));
    }

    let mut ranking = means;
    ranking.sort_by(|a, b| match (a.1.is_nan(), b.1.is_nan()) {
        (false, false) => b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)),
        (true, true) => a.0.cmp(&b.0),
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
    });
    let best = ranking.first().filter(|(_, m)| !m.is_nan()).map(|(id, _)| *id);

    Ok(GridOutcome { rows, ranking, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn sweep_config(grid_lines: &str) -> Config {
        Config::parse(&format!(
            "[env]\nn_links = 3\n[experiment]\nseeds = [1, 2, 3, 4, 5]\n\
             [experiment.grid]\n{grid_lines}"
        ))
        .unwrap()
    }

    fn point(mean_return: f64) -> CurvePoint {
        CurvePoint {
            episode: 0,
            mean_return,
            mean_episode_length: 1.0,
            sigma_mean: 0.1,
        }
    }

    #[test]
    fn an_empty_grid_is_the_single_base_cell() {
        let base = LearnerConfig::default();
        let cells = grid_cells(&base, &GridSection::default());
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].id, 0);
        assert_eq!(cells[0].learner.learning_rate, base.learning_rate);
        assert_eq!(cells[0].learner.window, base.window);
        assert_eq!(cells[0].learner.sigma_init, base.sigma_init);
    }

    #[test]
    fn two_by_two_axes_over_five_seeds_run_twenty_cells() {
        let cfg = sweep_config("alpha = [1e-3, 1e-4]\nlambda = [0.5, 0.9]\n");
        let calls = AtomicUsize::new(0);
        let out = grid_search(&cfg, &|l, seed| {
            calls.fetch_add(1, Ordering::Relaxed);
            Ok(vec![point(0.0), point(l.learning_rate * 1e4 + seed as f64)])
        })
        .unwrap();
        assert_eq!(calls.load(Ordering::Relaxed), 20);
        assert_eq!(out.rows.len(), 20);
        assert_eq!(out.ranking.len(), 4);
        let row = &out.rows[7];
        assert_eq!((row.cell_id, row.seed), (1, 3));
        assert_eq!(row.alpha, 1e-3);
        assert_eq!(row.lambda, 0.9);
        assert_eq!(row.final_return, 10.0 + 3.0);
    }

    #[test]
    fn the_last_curve_point_is_the_score() {
        let cfg = sweep_config("");
        let out = grid_search(&cfg, &|_, seed| {
            Ok(vec![point(100.0), point(seed as f64)])
        })
        .unwrap();
        assert_eq!(out.ranking, vec![(0, 3.0)]);
        assert_eq!(out.best, Some(0));
    }

    #[test]
    fn a_crashing_cell_yields_nan_rows_and_ranks_last() {
        let cfg = sweep_config("alpha = [1e-2, 1e-3, 1e-4]\n");
        let out = grid_search(&cfg, &|l, _| {
            if l.learning_rate == 1e-3 {
                Err(Error::Config { message: "diverged".into() })
            } else {
                Ok(vec![point(-l.learning_rate)])
            }
        })
        .unwrap();
        assert_eq!(out.rows.len(), 15);
        assert!(out.rows[5..10].iter().all(|r| r.final_return.is_nan()));
        assert_eq!(out.ranking[0].0, 2);
        assert_eq!(out.ranking[1].0, 0);
        assert_eq!(out.ranking[2].0, 1);
        assert!(out.ranking[2].1.is_nan());
        assert_eq!(out.best, Some(2));
    }

    #[test]
    fn best_tracks_the_highest_mean_across_seeds() {
        let cfg = sweep_config("eta = [0.1, 0.2, 0.3]\n");
        let out = grid_search(&cfg, &|l, seed| {
            Ok(vec![point(if l.entropy_weight == 0.2 {
                5.0 + seed as f64
            } else {
                seed as f64
            })])
        })
        .unwrap();
        assert_eq!(out.best, Some(1));
        assert_eq!(out.ranking[0], (1, 8.0));
    }
}
