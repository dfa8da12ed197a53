//! Drives the module through an embedded interpreter.

use fracwave_py::fracwave_module;
use pyo3::prelude::*;

fn run(code: &std::ffi::CStr) {
    pyo3::append_to_inittab!(fracwave_module);
    Python::initialize();
    Python::attach(|py| {
        if let Err(e) = py.run(code, None, None) {
            e.print(py);
            panic!("python code failed");
        }
    });
}

#[test]
fn module_round_trip() {
    run(cr#"
import math
import fracwave as fw

assert abs(fw.ml(1.0, 1.0, -1.0) - math.exp(-1.0)) < 1e-12
assert fw.admissibility(3, 2.0, 1.5, 1.7)["theta_sup"] == 0.625

d = fw.Domain.interval(math.pi, 32, 8)
cfg = fw.SolverConfig(1.5, 1.0, 10)
u0 = [0.5 / (n + 1) ** 2 for n in range(8)]
tr = fw.solve(d, cfg, fw.Nonlinearity.power_abs(1.0, 1.5), u0, u0)
assert len(tr) == 11 and not tr.blown
longer = fw.continue_trajectory(d, tr, 0.5, cfg, fw.Nonlinearity.power_abs(1.0, 1.5))
assert len(longer) == 16 and longer.fields[:11] == tr.fields

g, iters, diverged = fw.solve_picard_global(d, cfg, fw.Nonlinearity.power_abs(1.0, 1.5), u0, u0, 1.0, "frozen")
assert not diverged and iters > 1
assert max(abs(a - b) for a, b in zip(g.final_field, tr.final_field)) < 1e-10

s = fw.run_experiment("regularization", d, fw.SolverConfig(1.5, 1.0, 16),
                      fw.Nonlinearity.power_abs(1.0, 1.5), {"thetas": [0.25]})
assert s["experiment"] == "regularization" and s["fail_count"] == 0

try:
    fw.run_experiment("rates", d, cfg, fw.Nonlinearity.zero(), {"betas": []})
    raise AssertionError("empty grid accepted")
except fw.FracwaveError:
    pass
"#);
}
