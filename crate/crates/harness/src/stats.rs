use statrs::distribution::{ContinuousCDF, StudentsT};

/// One-sided paired t-test of `mean(a - b) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub p_value: f64,
}

impl PairedTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

pub fn paired_t_greater(a: &[f64], b: &[f64]) -> PairedTest {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let n = a.len();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return PairedTest {
            n,
            mean_diff: mean,
            t: f64::NAN,
            p_value: 1.0,
        };
    }
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    if se == 0.0 {
        let p_value = if mean > 0.0 { 0.0 } else { 1.0 };
        let t = if mean > 0.0 { f64::INFINITY } else { 0.0 };
        return PairedTest { n, mean_diff: mean, t, p_value };
    }
    let t = mean / se;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid degrees of freedom");
    PairedTest {
        n,
        mean_diff: mean,
        t,
        p_value: 1.0 - dist.cdf(t),
    }
}
