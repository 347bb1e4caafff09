//! Subcommand table and shared helpers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::Value;

use crate::config::{flag, key, optional, Key, Params};
use gph_core::spectral::random::smooth_unit_field;
use gph_core::spectral::{make_lattice, ModeLattice, TorusField};
use gph_core::Result;

mod boardgame;
mod hierarchy;
mod nbody;
mod probes;

/// Result of one run: the files written and a JSON summary for the manifest.
pub struct Outcome {
    pub files: Vec<String>,
    pub summary: Value,
}

pub struct CommandSpec {
    pub name: &'static str,
    pub about: &'static str,
    /// CSV columns, shown in `--help`.
    pub columns: &'static str,
    pub keys: &'static [Key],
    pub run: fn(&Params, &Path) -> Result<Outcome>,
}

const SEED: Key = key("seed", "1", "seed of every random draw");

pub const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "nls-evolve",
        about: "Evolve a seeded smooth datum under the truncated cubic NLS",
        columns: "nls_trajectory.csv: t,mass,energy,H1_norm",
        keys: &[
            key("m", "8", "lattice cutoff M"),
            SEED,
            key("lambda", "1", "coupling, +1 defocusing or -1 focusing"),
            key("dt", "0.001", "time step"),
            key("t-final", "0.5", "final time"),
            key("samples", "50", "number of output intervals"),
            key("integrator", "strang", "strang or ifrk4"),
        ],
        run: hierarchy::nls_evolve_cmd,
    },
    CommandSpec {
        name: "hierarchy-residual",
        about: "Differential GP-hierarchy residual of the factorized solution",
        columns: "residual.csv: t,k,residual_hs,defect_hs,growth_value_k",
        keys: &[
            key("m", "4", "lattice cutoff M"),
            SEED,
            key("lambda", "1", "NLS coupling"),
            key("dt", "0.001", "sample spacing and NLS step"),
            key("t-final", "0.1", "final time"),
            key("k", "1,2", "orders to check"),
            key("repr", "product", "density representation: product or dense"),
            key("scheme", "interaction", "time derivative: interaction or direct"),
        ],
        run: hierarchy::residual_cmd,
    },
    CommandSpec {
        name: "duhamel-check",
        about: "Mild-solution defect of the factorized solution",
        columns: "duhamel.csv: t,k,residual_hs,defect_hs,growth_value_k",
        keys: &[
            key("m", "4", "lattice cutoff M"),
            SEED,
            key("lambda", "1", "NLS coupling"),
            key("dt", "0.001", "sample spacing and NLS step"),
            key("t-final", "0.1", "final time"),
            key("k", "1", "orders to check"),
            key("quadrature-steps", "100", "quadrature subintervals of [0, t_final]"),
            key("rule", "simpson", "simpson or trapezoid"),
            key("repr", "product", "density representation: product or dense"),
        ],
        run: hierarchy::duhamel_cmd,
    },
    CommandSpec {
        name: "definetti",
        about: "Hierarchy residuals of an atomic de Finetti mixture against its atoms",
        columns: "definetti.csv: t,k,mixture_residual,worst_atom_residual;\ngrowth.csv: k,alpha,value",
        keys: &[
            key("m", "2", "lattice cutoff M"),
            SEED,
            key("atoms", "3", "number of seeded smooth atoms"),
            optional("weights", "atom weights summing to 1 (uniform when empty)"),
            key("lambda", "1", "NLS coupling"),
            key("dt", "0.001", "sample spacing and NLS step"),
            key("t-final", "0.05", "final time"),
            key("k", "1,2", "orders to check"),
            key("alpha", "1", "Sobolev weight of the growth check at t = 0"),
        ],
        run: hierarchy::definetti_cmd,
    },
    CommandSpec {
        name: "boardgame-enum",
        about: "Enumerate collision maps and their upper-echelon classes",
        columns: "maps.csv: k,r,rank,map,upper_echelon,class_id;\nclasses.csv: k,r,class_id,representative,class_size",
        keys: &[key("k", "2", "number of roots k"), key("r", "2", "number of collisions r")],
        run: boardgame::enum_cmd,
    },
    CommandSpec {
        name: "tree-build",
        about: "Build the binary-tree forest of a collision map",
        columns: "trees.csv: tree,child,internal,leaves,distinguished; forest.dot",
        keys: &[
            key("k", "3", "number of roots k"),
            key("map", "1-2-3-4-6", "values rho(k+1)-...-rho(k+r)"),
        ],
        run: boardgame::tree_cmd,
    },
    CommandSpec {
        name: "tree-product-check",
        about: "Compare the Duhamel integrand with the tensor product of its tree factors",
        columns: "product_check.csv: field,trial,t,times,rel_error",
        keys: &[
            flag("example-435", "use the worked example: k = 3, map 1-2-3-4-6, M = 2"),
            key("k", "3", "number of roots k"),
            key("map", "1-2-3-4-6", "collision map values"),
            key("m", "2", "lattice cutoff M"),
            SEED,
            key("fields", "3", "random data"),
            key("trials", "5", "random time tuples per datum"),
            key("t", "1", "outer time"),
        ],
        run: boardgame::product_check_cmd,
    },
    CommandSpec {
        name: "theta-expand",
        about: "Expand each tree factor into its theta-kernel tableau and resum it",
        columns: "theta.csv: tree,vertex,index,time,terms,bound,within_bound,resum_rel_error",
        keys: &[
            key("k", "3", "number of roots k"),
            key("map", "1-2-3-4-6", "collision map values"),
            key("m", "2", "lattice cutoff M"),
            SEED,
            key("t", "0.1", "outer time"),
            optional("times", "t_1 > ... > t_r (seeded draw when empty)"),
        ],
        run: boardgame::theta_cmd,
    },
    CommandSpec {
        name: "trilinear-probe",
        about: "Monte-Carlo ratios of the trilinear space-time estimate",
        columns: "trilinear.csv: probe,n1,n2,n3,s,delta,sample,seed,lhs,rhs_bound,ratio;\ntrilinear_trend.csv: delta,slope,growing,max_ratios",
        keys: &[
            key("m", "16", "lattice cutoff M"),
            SEED,
            key("samples", "100", "samples per sweep point"),
            key("sweep", "1:1:1,2:1:1,4:1:1,8:1:1", "dyadic triples N1:N2:N3"),
            key("interval", "0,1", "time interval inside [0, 1]"),
            key("deltas", "0,0.01,0.05,0.1,0.25,0.5", "surrogate delta grid"),
        ],
        run: probes::trilinear_cmd,
    },
    CommandSpec {
        name: "multilinear-probe",
        about: "Monte-Carlo ratios of the multilinear H^s estimate",
        columns: "multilinear.csv: probe,n1,n2,n3,s,delta,sample,seed,lhs,rhs_bound,ratio",
        keys: &[
            key("m", "8", "lattice cutoff M"),
            SEED,
            key("s", "1", "regularity s in [0, 1]"),
            key("samples", "200", "samples"),
            key("interval", "0,1", "time interval inside [0, 1]"),
            key("band", "2", "samples live on |n| < 2 band"),
        ],
        run: probes::multilinear_cmd,
    },
    CommandSpec {
        name: "sobolev-probe",
        about: "Ratios ||f||_{L^6} / ||f||_{H^1} on random samples",
        columns: "sobolev.csv: probe,n1,n2,n3,s,delta,sample,seed,lhs,rhs_bound,ratio",
        keys: &[
            key("m", "16", "lattice cutoff M"),
            SEED,
            key("samples", "2000", "samples"),
            key("band", "4", "samples live on |n| < 2 band"),
        ],
        run: probes::sobolev_cmd,
    },
    CommandSpec {
        name: "nbody-evolve",
        about: "Exact N-body evolution of a factorized state",
        columns: "nbody.csv: t,norm,energy,norm_drift,energy_drift,marginal_trace,symmetry_defect",
        keys: &[
            key("n", "2", "particle number N"),
            key("m", "1", "lattice cutoff M"),
            SEED,
            key("beta", "0.5", "scaling exponent in (0, 3/5)"),
            key("coupling", "1", "interaction strength"),
            key("dt", "0.01", "output spacing"),
            key("t-final", "0.2", "final time"),
            key("method", "auto", "dense, krylov or auto"),
        ],
        run: nbody::evolve_cmd,
    },
    CommandSpec {
        name: "bbgky-residual",
        about: "Finite-difference BBGKY defect of exact N-body marginals",
        columns: "bbgky.csv: t,k,dt,residual_hs",
        keys: &[
            key("n", "2", "particle number N"),
            key("m", "1", "lattice cutoff M"),
            SEED,
            key("k", "1", "marginal order"),
            key("beta", "0.5", "scaling exponent"),
            key("coupling", "1", "interaction strength"),
            key("dt", "0.001", "sample spacing"),
            key("samples", "10", "number of sample intervals"),
            key("scheme", "interaction", "time derivative: interaction or direct"),
        ],
        run: nbody::bbgky_cmd,
    },
    CommandSpec {
        name: "cutoff-data",
        about: "Energy cutoff of factorized initial data and its moment bounds",
        columns: "cutoff.csv: kappa,order,moment,bound,holds,distance",
        keys: &[
            key("n", "2", "particle number N"),
            key("m", "1", "lattice cutoff M"),
            SEED,
            key("beta", "0.5", "scaling exponent"),
            key("coupling", "1", "interaction strength"),
            key("kappa", "0.1,0.2,0.4,0.8", "cutoff parameters"),
            key("envelope-width", "3", "Gaussian width of the one-particle datum"),
        ],
        run: nbody::cutoff_cmd,
    },
    CommandSpec {
        name: "chaos-diagnostic",
        about: "Distance of N-body marginals from tensor powers of the NLS flow",
        columns: "chaos.csv: N,t,trace_dist_k1,trace_dist_k2,energy_per_particle,asympt_fact_dist,kappa,beta,M,dt",
        keys: &[
            key("n-list", "1,2,3", "particle numbers"),
            key("m", "1", "lattice cutoff M"),
            SEED,
            key("beta", "0.5", "scaling exponent"),
            key("coupling", "1", "interaction strength, 0 or 1"),
            key("times", "0,0.05,0.1", "sample times"),
            optional("kappa", "energy cutoff applied to the initial data"),
            key("dt", "0.001", "NLS step"),
            key("method", "auto", "dense, krylov or auto"),
        ],
        run: nbody::chaos_cmd,
    },
];

pub fn find(name: &str) -> Option<&'static CommandSpec> {
    COMMANDS.iter().find(|c| c.name == name)
}

pub(crate) fn lattice(p: &Params) -> Result<ModeLattice> {
    make_lattice(p.get("m")?)
}

/// The seeded smooth unit datum shared by the commands.
pub(crate) fn datum(p: &Params) -> Result<TorusField> {
    Ok(smooth_unit_field(lattice(p)?, p.get("seed")?, 0))
}

pub(crate) fn write_output(
    dir: &Path,
    name: &str,
    files: &mut Vec<String>,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    body(&mut w)?;
    w.flush()?;
    files.push(name.to_string());
    Ok(())
}
