//! Fits checked against statsmodels (MixedLM with REML, and OLS) on a fixed
//! 2x2 within-subjects dataset with six subjects.

use approx::assert_relative_eq;
use artc_core::{fit_model, Dataset, DesignKind};

const ROWS: [(&str, &str, &str, f64); 24] = [
    ("S1", "A1", "B1", 0.44328),
    ("S1", "A1", "B2", 1.262206),
    ("S1", "A2", "B1", 2.013195),
    ("S1", "A2", "B2", 1.562371),
    ("S2", "A1", "B1", 2.19936),
    ("S2", "A1", "B2", 1.818558),
    ("S2", "A2", "B1", 0.905246),
    ("S2", "A2", "B2", 0.772597),
    ("S3", "A1", "B1", 1.758874),
    ("S3", "A1", "B2", 0.736219),
    ("S3", "A2", "B1", 0.961614),
    ("S3", "A2", "B2", 2.073972),
    ("S4", "A1", "B1", 0.792636),
    ("S4", "A1", "B2", 0.626321),
    ("S4", "A2", "B1", 3.125221),
    ("S4", "A2", "B2", 4.58548),
    ("S5", "A1", "B1", 1.74169),
    ("S5", "A1", "B2", 2.675366),
    ("S5", "A2", "B1", 5.25188),
    ("S5", "A2", "B2", 5.653258),
    ("S6", "A1", "B1", 4.24117),
    ("S6", "A1", "B2", 4.907),
    ("S6", "A2", "B1", 5.251531),
    ("S6", "A2", "B2", 4.73851),
];

fn dataset() -> Dataset {
    Dataset::from_labelled_rows(
        &["A", "B"],
        Some("S"),
        "Y",
        ROWS.iter().map(|&(s, a, b, y)| (vec![a, b], Some(s), y)),
    )
    .unwrap()
}

#[test]
fn reml_matches_statsmodels() {
    let m = fit_model(&dataset(), DesignKind::Within).unwrap();
    let beta = [1.8628350000000002, 1.0552794999999997, 0.141443333333333, 0.17147350000000058];
    let se = [0.7170408892113085, 0.6387149013399909, 0.6387149013399909, 0.9032792759648084];
    for i in 0..4 {
        assert_relative_eq!(m.beta[i], beta[i], max_relative = 1e-9, epsilon = 1e-12);
        assert_relative_eq!(m.cov_beta[(i, i)].sqrt(), se[i], max_relative = 1e-5);
    }
    assert_relative_eq!(m.sigma2, 1.2238701755812624, max_relative = 1e-5);
    assert_relative_eq!(m.theta, 1.5205989020367585, max_relative = 1e-5);
    assert_eq!(m.df_contrast, 24.0 - 4.0 - 5.0);
}

#[test]
fn ols_matches_statsmodels() {
    let m = fit_model(&dataset(), DesignKind::Between).unwrap();
    let se = [0.7170404861770838, 1.0140483803222289, 1.0140483803222289, 1.434080972354166];
    for (i, s) in se.iter().enumerate() {
        assert_relative_eq!(m.cov_beta[(i, i)].sqrt(), *s, max_relative = 1e-10);
    }
    assert_relative_eq!(m.sigma2, 3.0848823529024085, max_relative = 1e-10);
    assert_eq!(m.df_contrast, 20.0);
}
