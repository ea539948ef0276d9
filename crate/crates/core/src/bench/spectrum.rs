//! Per-subdomain generalized spectra as CSV.

use std::io::Write;

use serde::Serialize;

use super::{build_problem, ExperimentConfig};
use crate::assembly::assemble_subdomain;
use crate::coarse::{rhs_matrix, RhsVariant};
use crate::error::{Error, Result};
use crate::linalg::{dense_schur, generalized_symmetric_eigen};
use crate::mesh::{CoefficientField, StructuredMesh, SubdomainClass};
use crate::partition::DofPartition;

/// Which subdomains to dump.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumSelector {
    /// The first corner, edge and floating subdomain.
    Classes,
    Subdomain(usize),
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub class: &'static str,
    pub subdomain: usize,
    pub variant: &'static str,
    /// 1-based.
    pub index: usize,
    pub lambda: f64,
    /// Empty for zero eigenvalues.
    pub log10_lambda: Option<f64>,
}

/// Eigenvalues of `S^(i) ξ = λ Ã^(i) ξ`, ascending.
pub fn local_spectrum(
    mesh: &StructuredMesh,
    coeffs: &CoefficientField,
    partition: &DofPartition,
    i: usize,
    variant: RhsVariant,
) -> Result<Vec<f64>> {
    let sm = assemble_subdomain(mesh, coeffs, partition, i)?;
    let s = dense_schur(&sm).map_err(|e| e.in_subdomain(i))?;
    let b = rhs_matrix(&sm.a_gg, &partition.gamma_edge_labels(i), variant);
    Ok(generalized_symmetric_eigen(&s, &b).map_err(|e| e.in_subdomain(i))?.values)
}

/// Spectra of the selected subdomains for all three right-hand sides.
pub fn dump_spectrum(config: &ExperimentConfig, selector: SpectrumSelector) -> Result<Vec<SpectrumRow>> {
    config.validate()?;
    let problem = build_problem(config)?;
    let mesh = &problem.mesh;
    let n = mesh.subdomain_count();
    let chosen: Vec<usize> = match selector {
        SpectrumSelector::All => (0..n).collect(),
        SpectrumSelector::Subdomain(i) if i < n => vec![i],
        SpectrumSelector::Subdomain(i) => {
            return Err(Error::InvalidParameter(format!("subdomain {i} out of range (mesh has {n})")));
        }
        SpectrumSelector::Classes => [SubdomainClass::Corner, SubdomainClass::Edge, SubdomainClass::Floating]
            .iter()
            .filter_map(|c| (0..n).find(|k| mesh.subdomain_class(*k) == *c))
            .collect(),
    };
    let mut rows = Vec::new();
    for &i in &chosen {
        let class = mesh.subdomain_class(i).as_str();
        for variant in RhsVariant::ALL {
            let values = local_spectrum(mesh, &problem.coeffs, &problem.partition, i, variant)?;
            for (k, &lambda) in values.iter().enumerate() {
                rows.push(SpectrumRow {
                    class,
                    subdomain: i,
                    variant: variant.as_str(),
                    index: k + 1,
                    lambda,
                    log10_lambda: (lambda > 0.0).then(|| lambda.log10()),
                });
            }
        }
    }
    Ok(rows)
}

/// Writes the rows with a header line, which is present even when empty.
pub fn write_spectrum_csv<W: Write>(rows: &[SpectrumRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["class", "subdomain", "variant", "index", "lambda", "log10_lambda"]).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_subdomain_is_header_only() {
        let cfg = ExperimentConfig { subdomains_per_side: 1, cells_per_subdomain_side: 4, ..Default::default() };
        let rows = dump_spectrum(&cfg, SpectrumSelector::Classes).unwrap();
        assert!(rows.is_empty());
        let mut buf = Vec::new();
        write_spectrum_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "class,subdomain,variant,index,lambda,log10_lambda\n");
    }

    #[test]
    fn floating_constant_has_zero_first() {
        let cfg = ExperimentConfig { subdomains_per_side: 3, cells_per_subdomain_side: 4, ..Default::default() };
        let rows = dump_spectrum(&cfg, SpectrumSelector::Subdomain(4)).unwrap();
        let first = rows.iter().find(|r| r.variant == "exact").unwrap();
        assert_eq!(first.class, "floating");
        assert!(first.lambda.abs() < 1e-12 && first.log10_lambda.is_none());
        assert!(matches!(dump_spectrum(&cfg, SpectrumSelector::Subdomain(9)), Err(Error::InvalidParameter(_))));
    }
}
