//! Static catalog of experiment kinds.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Kind {
    EquivCheck,
    Cover,
    Spectrum,
    Propagate,
    OpnormGrowth,
    HeatTrace,
    WaveOp,
    Smatrix,
    ResolventCont,
    Hypotheses,
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub kind: &'static str,
    pub description: &'static str,
    pub required_keys: &'static [&'static str],
    /// Columns of each CSV artifact as "file: col, col, …".
    pub csv_columns: &'static [&'static str],
}

pub const ALL: [Kind; 10] = [
    Kind::EquivCheck,
    Kind::Cover,
    Kind::Spectrum,
    Kind::Propagate,
    Kind::OpnormGrowth,
    Kind::HeatTrace,
    Kind::WaveOp,
    Kind::Smatrix,
    Kind::ResolventCont,
    Kind::Hypotheses,
];

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::EquivCheck => "equiv-check",
            Kind::Cover => "cover",
            Kind::Spectrum => "spectrum",
            Kind::Propagate => "propagate",
            Kind::OpnormGrowth => "opnorm-growth",
            Kind::HeatTrace => "heat-trace",
            Kind::WaveOp => "wave-op",
            Kind::Smatrix => "smatrix",
            Kind::ResolventCont => "resolvent-cont",
            Kind::Hypotheses => "hypotheses",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn entry(self) -> CatalogEntry {
        let (description, required_keys, csv_columns): (&'static str, &'static [&'static str], &'static [&'static str]) = match self {
            Kind::EquivCheck => (
                "beta-equivalence of warped metrics: equivalence-relation axioms and the connection/gradient characterization on random triples",
                &[],
                &["triples.csv: triple, fiber_dim, beta, reflexive, symmetric, transitive, characterization_agree, v01, v10, v12, v21, v02, v20"],
            ),
            Kind::Cover => (
                "greedy covers of a hyperbolic-disk point cloud: coverage, separation, multiplicity and kappa(s) growth",
                &["points", "radius", "h"],
                &["centers.csv: index, r, theta, radius", "kappa.csv: s, kappa"],
            ),
            Kind::Spectrum => ("discrete spectrum of one mode of a cusp or cylinder end", &["end", "grid"], &["eigenvalues.csv: k, eigenvalue"]),
            Kind::Propagate => (
                "wave propagator cos(s sqrt(A)) of a mollified point mass and its leakage outside the causal ball",
                &["end", "grid", "x0", "delta", "s"],
                &["solution.csv: x, u0, u"],
            ),
            Kind::OpnormGrowth => (
                "weighted operator norm of cos(s sqrt(A)) on L2 with weight beta and its exponential growth fit",
                &["end", "grid", "beta", "s_max"],
                &["opnorm.csv: s, norm, ln_norm, fit"],
            ),
            Kind::HeatTrace => (
                "trace norm of the heat-semigroup difference for a perturbed end under domain truncation",
                &["end", "dx", "t", "lengths"],
                &["truncation.csv: length, points, t, trace_norm, hs_norm, increment"],
            ),
            Kind::WaveOp => (
                "time-dependent wave operators on the free cusp: Cauchy increments, isometry and intertwining defects",
                &["model", "perturbation", "lambda0", "sigma", "times"],
                &["cauchy.csv: t, increment"],
            ),
            Kind::Smatrix => (
                "stationary phase shifts and scattering matrix for the cusp mode-0 channel, with a closed-form column for square wells",
                &["n", "perturbation", "lambda_min", "lambda_max", "lambda_points"],
                &["smatrix.csv: lambda, delta, s_re, s_im, abs_s, oracle_delta"],
            ),
            Kind::ResolventCont => (
                "meromorphic continuation of the resolvent to the second sheet and resonance search in the momentum plane",
                &["n", "re", "im"],
                &["heatmap.csv: re_z, im_z, log10_min_sv"],
            ),
            Kind::Hypotheses => (
                "integrability and injectivity-radius hypotheses of the trace-class theorem for a decay profile and warped end",
                &["beta", "a", "b", "metric"],
                &[],
            ),
        };
        CatalogEntry { kind: self.name(), description, required_keys, csv_columns }
    }
}

pub fn list_experiments() -> Vec<CatalogEntry> {
    ALL.into_iter().map(Kind::entry).collect()
}

pub fn unknown_kind_message(s: &str) -> String {
    let names: Vec<&str> = ALL.iter().map(|k| k.name()).collect();
    format!("unknown experiment kind `{s}`; valid kinds: {}", names.join(", "))
}
