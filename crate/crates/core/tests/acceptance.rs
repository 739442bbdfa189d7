//! One line per acceptance criterion; exits non-zero if any fails.

use std::time::Instant;

use hdiv_geodecomp::assembly::{self, AssemblyOptions};
use hdiv_geodecomp::dofs::{self, Element, QuotientMode};
use hdiv_geodecomp::element::{self, Family};
use hdiv_geodecomp::mesh::{self, Mesh};
use hdiv_geodecomp::rational::{self, frac};
use hdiv_geodecomp::report::{Check, CheckStatus};
use hdiv_geodecomp::simplex::{FrameConvention, LocalFrames, Simplex};
use hdiv_geodecomp::tensor::{self, SuccessorReading};
use hdiv_geodecomp::Result;

/// Relative spread of β over the refinement levels.
const MAX_DRIFT: f64 = 0.2;
/// Relative eigenvalue cutoff below which modes count as kernel.
const KERNEL_THRESHOLD: f64 = 1e-10;
const MESHES: [&str; 4] = ["two_triangles", "criss_cross", "two_tets", "cube_freudenthal"];

fn skewed(n: usize) -> Simplex {
    let mut v = vec![rational::zeros(n)];
    for i in 0..n {
        let mut e = rational::unit(n, i);
        e[(i + 1) % n] += frac(1, 3);
        e[i] += frac(i as i64, 5);
        v.push(e);
    }
    Simplex::new(v).unwrap()
}

struct Tally {
    checks: usize,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self { checks: 0, failures: Vec::new(), notes: Vec::new() }
    }

    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        self.checks += 1;
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn check(&mut self, c: &Check) {
        self.expect(c.status == CheckStatus::Pass, format!("{} {}", c.name, c.witness));
    }
}

fn lagrange(t: &mut Tally) -> Result<()> {
    for n in 1..=3 {
        let s = skewed(n);
        for conv in FrameConvention::ALL {
            let fr = LocalFrames::new(&s, conv);
            for r in 1..=4 {
                let b = element::decompose(Family::Lagrange, &s, r, &fr)?;
                t.check(&element::verify_decomposition(&b));
                let e = Element::new(Family::Lagrange, &s, r, -1, &fr)?;
                t.check(&dofs::certify(&e.dofs, &e.basis)?.to_check());
                t.expect(dofs::block_lower_triangular(&e.dofs, &e.basis)?, format!("block triangular n{n} r{r}"));
            }
        }
    }
    Ok(())
}

fn bubbles(t: &mut Tally) -> Result<()> {
    for n in 2..=3 {
        let s = skewed(n);
        for conv in FrameConvention::ALL {
            let fr = LocalFrames::new(&s, conv);
            for fam in [Family::Face, Family::VectorLagrange] {
                for r in 0..=4 {
                    t.check(&element::verify_bubble_characterization(fam, &s, r, &fr)?);
                }
            }
        }
    }
    Ok(())
}

fn unisolvence(t: &mut Tally) -> Result<()> {
    let mut cases = Vec::new();
    for n in 2..=3usize {
        let top = n as i32 - 2;
        for r in 1..=4 {
            for k in -1..=top {
                cases.push((Family::Face, n, r, k));
            }
        }
        for r in 2..=4 {
            cases.push((Family::Traceless, n, r, 0));
            cases.push((Family::Symmetric, n, r, 0));
            if top > 0 {
                cases.push((Family::Symmetric, n, r, top));
            }
        }
    }
    for (fam, n, r, k) in cases {
        let s = skewed(n);
        let fr = LocalFrames::new(&s, FrameConvention::Orthogonalized);
        let c = dofs::certify_unisolvence(fam, &s, r, k, &fr)?;
        t.expect(c.dofs == c.shape_dim, format!("{fam:?} n{n} r{r} k{k}: {} dofs for {}", c.dofs, c.shape_dim));
        t.check(&c.to_check());
    }
    Ok(())
}

fn traceless_dual(t: &mut Tally) -> Result<()> {
    for n in 2..=4 {
        for s in [Simplex::reference(n), skewed(n)] {
            let d = tensor::traceless_gradient_basis(&s, SuccessorReading::ModNPlusOne)?;
            t.expect(d.basis.len() == n * n - 1, format!("basis size n{n}"));
            t.expect(d.is_kronecker(), format!("pairing n{n}"));
            t.expect(d.all_traceless(n), format!("traceless n{n}"));
        }
    }
    Ok(())
}

fn div_image(t: &mut Tally) -> Result<()> {
    for n in 2..=3 {
        let s = skewed(n);
        let fr = LocalFrames::new(&s, FrameConvention::EdgeTangentsFaceNormals);
        for fam in [Family::Face, Family::Traceless, Family::Symmetric] {
            for r in 2..=4 {
                let c = element::verify_div_image(fam, &s, r, &fr)?;
                let required = fam != Family::Symmetric || r > n;
                if required {
                    t.check(&c);
                } else {
                    t.notes.push(format!("{} below threshold: identity_holds={}", c.name, c.witness["identity_holds"]));
                }
            }
        }
    }
    Ok(())
}

fn quotient(t: &mut Tally) -> Result<()> {
    for k in 0..=1 {
        for mode in [QuotientMode::ModP0, QuotientMode::ModP1] {
            let th = mode.threshold(3, k);
            for r in [th, th + 1] {
                t.check(&dofs::verify_quotient_unisolvence(3, r, k, mode)?);
            }
        }
    }
    Ok(())
}

fn assembly_cases(n: usize) -> Vec<(Family, usize, i32)> {
    let mut v = vec![
        (Family::Lagrange, 1, -1),
        (Family::Lagrange, 3, -1),
        (Family::VectorLagrange, 2, -1),
        (Family::Face, 1, -1),
        (Family::Face, 2, -1),
        (Family::Face, 2, 0),
        (Family::Traceless, 2, 0),
        (Family::Symmetric, 2, 0),
    ];
    if n == 2 {
        v.extend([(Family::Face, 3, 0), (Family::Symmetric, 3, 0)]);
    } else {
        v.push((Family::Face, 3, 1));
    }
    v
}

fn global(t: &mut Tally) -> Result<()> {
    let opts = AssemblyOptions::default();
    for name in MESHES {
        for m in [mesh::builtin(name)?, mesh::builtin(&format!("refine({name})"))?] {
            for (fam, r, k) in assembly_cases(m.dim()) {
                let s = assembly::assemble(&m, fam, r, k, &opts)?;
                t.check(&assembly::check_dimension(&s));
                t.check(&assembly::check_conformity(&s, 2, 17));
                if fam.is_hdiv() && r >= 2 {
                    t.check(&assembly::negative_control(&m, fam, r, k, 17)?);
                }
            }
        }
    }
    Ok(())
}

fn sweep(t: &mut Tally, base: &Mesh, levels: usize, fam: Family, r: usize, k: i32) -> Result<()> {
    let c = assembly::infsup_sweep(base, levels, fam, r, k)?;
    let betas: Vec<f64> =
        c.witness["levels"].as_array().unwrap().iter().map(|l| l["beta"].as_str().unwrap().parse().unwrap()).collect();
    let max = betas.iter().copied().fold(f64::MIN, f64::max);
    let min = betas.iter().copied().fold(f64::MAX, f64::min);
    let drift = (max - min) / max;
    t.expect(min > 0.0 && drift < MAX_DRIFT, format!("{}: betas {betas:?}", c.name));
    if c.status == CheckStatus::SkippedBelowThreshold {
        t.notes.push(format!("n{} {} below degree threshold: betas {betas:?}", base.dim(), c.name));
    }
    Ok(())
}

fn infsup(t: &mut Tally) -> Result<()> {
    assert_eq!(assembly::MAX_DRIFT, MAX_DRIFT);
    assert_eq!(assembly::KERNEL_THRESHOLD, KERNEL_THRESHOLD);
    let m2 = mesh::two_triangles();
    let m3 = mesh::two_tets();
    for (m, levels) in [(&m2, 3), (&m3, 2)] {
        sweep(t, m, levels, Family::Face, 2, -1)?;
        sweep(t, m, levels, Family::Face, 2, 0)?;
        sweep(t, m, levels, Family::Traceless, 2, 0)?;
    }
    sweep(t, &m2, 3, Family::Symmetric, 3, 0)?;

    let opts = AssemblyOptions::default();
    for name in ["two_triangles", "criss_cross", "refine(two_triangles)", "two_tets"] {
        let m = mesh::builtin(name)?;
        let mut cases = vec![(Family::Face, 1, -1), (Family::Face, 2, 0), (Family::Traceless, 3, 0)];
        if m.dim() == 2 {
            cases.push((Family::Symmetric, 3, 0));
        }
        for (fam, r, k) in cases {
            let s = assembly::assemble(&m, fam, r, k, &opts)?;
            t.check(&assembly::check_div_onto(&s)?);
        }
        for r in 2..=m.dim() {
            let s = assembly::assemble(&m, Family::Symmetric, r, 0, &opts)?;
            let c = assembly::check_div_onto(&s)?;
            t.expect(c.status == CheckStatus::SkippedBelowThreshold, format!("{} should be below threshold", c.name));
            let info = assembly::infsup_constant(&s)?;
            t.notes.push(format!(
                "{name} {} below threshold: deficit {} beta {:.4}",
                c.name, c.witness["deficit"], info.beta
            ));
        }
    }
    Ok(())
}

type Criterion = fn(&mut Tally) -> Result<()>;

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("Lagrange decomposition and unisolvence", lagrange),
        ("vector bubble characterization and trace bijection", bubbles),
        ("unisolvence certificates", unisolvence),
        ("traceless dual basis", traceless_dual),
        ("div image identities", div_image),
        ("quotient space unisolvence", quotient),
        ("global assembly dimensions and conformity", global),
        ("inf-sup sweeps and div onto", infsup),
    ];
    let mut failed = 0;
    for (i, (label, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut t = Tally::new();
        if let Err(e) = run(&mut t) {
            t.failures.push(format!("error: {e}"));
        }
        let ok = t.failures.is_empty();
        failed += usize::from(!ok);
        println!(
            "criterion {}: {} {label} ({} checks, {:.1}s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            t.checks,
            start.elapsed().as_secs_f64()
        );
        for f in t.failures.iter().take(5) {
            println!("    failed: {f}");
        }
        for n in &t.notes {
            println!("    note: {n}");
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
