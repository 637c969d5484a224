"""Command line front end: basis, hamiltonian, spectrum, optimize, cmn, circuit,
simulate, analyze, pipeline and sweep.

Settings come from an optional ``key = value`` config file; flags override it.
Every file written carries a ``#`` header block (JSON reports a ``header``
key) with the resolved config, seed, version and ordering policies.  No
timestamps are written, so identical inputs give byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .ansatz import AnsatzParams, WavePacketSpec, build_cmn, encoding_diagnostics, optimize_all, wavepacket_exact
from .circuit import ORDERING_POLICY, GsParams, gs_circuit, predict_gate_counts, vqe_ground_state, wp_circuit
from .model import Group, LatticeSpec, basis_csv, hamiltonian_matrix, read_config
from .simulate import depolarize, embed, mitigate, read_shots, restrict, run, sample
from .spectra import classify_k0_excitation, ground_state, sector_spectra
from .stats import bootstrap, normalized, rms_error, staggered_density, trunc_metrics

CLASSIFIER_NOTE = ("reconstructed rule: non-mesonic when the first excited k=0 state puts more than half "
                   "its weight on the vacuum-orthogonal span of W|Omega>, W^dag|Omega>")
VACUUM_NOTE = "k=0 state projected orthogonal to |Omega>"
BIT_ORDER = "f0 b0 f1 b1 ... f(N-1) b(N-1) [a]; qubit 0 is the most significant bit"


@dataclass(frozen=True)
class RunConfig:
    group: str = "Z2"
    n_sites: int = 6
    m_f: float = 1.0
    epsilon: float = -0.3
    cutoff: int = 1
    sigma: float = math.pi / 6
    mu: float = 3.0
    k0: float = 0.0
    n_trotter: int = 1
    theta_c: float = 0.1
    n_shots: int = 500
    seed: int | None = None
    noise_1q: float = 0.0
    noise_2q: float = 0.0
    n_resamples: int = 10_000
    out: str = "lgtwave_out"
    jobs: int = 1

    @property
    def spec(self) -> LatticeSpec:
        return LatticeSpec(Group(self.group.upper()), self.n_sites, self.m_f, self.epsilon, self.cutoff)

    @property
    def wave_packet(self) -> WavePacketSpec:
        return WavePacketSpec(self.sigma, self.mu, self.k0)

    def require_seed(self) -> int:
        if self.seed is None:
            raise SystemExit("error: sampling runs need --seed (or seed = ... in the config)")
        return self.seed


_PI_FORM = re.compile(r"^\s*([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d*\.?\d+))?\s*$")


def _number(text: str) -> float:
    """Float literal, also accepting a*pi/b forms such as pi/6 or -2pi/5."""
    try:
        return float(text)
    except ValueError:
        pass
    m = _PI_FORM.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    a = m.group(1)
    coef = -1.0 if a == "-" else 1.0 if a in ("", "+") else float(a)
    return coef * math.pi / (float(m.group(2)) if m.group(2) else 1.0)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    types = {f.name: f.type for f in fields(RunConfig)}
    if getattr(args, "config", None):
        raw = read_config(args.config)
        unknown = set(raw) - set(types)
        if unknown:
            raise SystemExit(f"error: unknown config keys {sorted(unknown)}")
        cfg = replace(cfg, **{k: _coerce(types[k], v) for k, v in raw.items()})
    over = {k: getattr(args, k) for k in types if getattr(args, k, None) is not None}
    cfg = replace(cfg, **over)
    cfg.spec  # validate early
    return cfg


def _coerce(kind: str, value: str):
    if "int" in kind:
        return int(value)
    if "float" in kind:
        return _number(value)
    return value


# --------------------------------------------------------------------------
# Output helpers

def header(cfg: RunConfig, command: str, **extra) -> dict:
    h = {"tool": "lgtwave", "version": __version__, "command": command, "config": asdict(cfg),
         "seed": cfg.seed, "ordering": ORDERING_POLICY, "bit_order": BIT_ORDER}
    h.update(extra)
    return h


def _header_lines(h: dict) -> str:
    return "".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in h.items())


def write_file(path: Path, body: str, h: dict | None) -> Path:
    """Atomic write; CSV/QASM/text get a '#' header (QASM uses '//')."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if h is not None:
        lines = _header_lines(h)
        if path.suffix == ".qasm":
            first, rest = body.split("\n", 1)
            body = first + "\n" + lines.replace("# ", "// ") + rest
        else:
            body = lines + body
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(body)
    os.replace(tmp, path)
    return path


def write_json(path: Path, payload: dict, h: dict) -> Path:
    return write_file(path, json.dumps({"header": h, **payload}, indent=2, sort_keys=True,
                                       default=_jsonable) + "\n", None)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def strip_header(text: str) -> str:
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


# --------------------------------------------------------------------------
# Stages

def stage_basis(cfg: RunConfig) -> str:
    return basis_csv(cfg.spec)


def stage_hamiltonian(cfg: RunConfig) -> str:
    H = hamiltonian_matrix(cfg.spec)
    rows = ["row,col,re,im"]
    for i, j in zip(*np.nonzero(np.abs(H) > 1e-15)):
        rows.append(f"{i},{j},{H[i, j].real:.15g},{H[i, j].imag:.15g}")
    return "\n".join(rows) + "\n"


def stage_spectrum(cfg: RunConfig) -> tuple[str, dict]:
    spec = cfg.spec
    H = hamiltonian_matrix(spec)
    e0, _ = ground_state(spec, H)
    rows = ["k,index,energy"]
    for k, ev in sector_spectra(spec, H).items():
        rows += [f"{k:.15g},{i},{e:.15g}" for i, e in enumerate(ev)]
    c = classify_k0_excitation(spec, H=H)
    report = {"ground_energy": e0, "k0_excitation": c.label.value, "winding_overlap": c.winding_overlap,
              "mesonic_overlap": c.mesonic_overlap, "gap": c.energy_gap, "classifier": CLASSIFIER_NOTE}
    return "\n".join(rows) + "\n", report


def stage_optimize(cfg: RunConfig) -> AnsatzParams:
    return optimize_all(cfg.spec, jobs=cfg.jobs)


def stage_gs(cfg: RunConfig) -> tuple[GsParams, dict]:
    p, rep = vqe_ground_state(cfg.spec)
    return p, {"theta_h": p.theta_h, "theta_eps": p.theta_eps, "theta_eps_mod_2pi": p.theta_eps_mod_2pi,
               "theta_m": p.theta_m, "n_layers": p.n_layers, "energy": rep.energy,
               "exact_energy": rep.exact_energy, "infidelity": rep.infidelity,
               "delta_energy": rep.delta_energy, "evaluations": rep.n_evaluations, "converged": rep.converged}


@dataclass
class Bundle:
    files: dict[str, Path]
    report: dict


def run_pipeline(cfg: RunConfig, out: Path) -> Bundle:
    """Ground state, k-sector ansatz, C_mn assembly, circuits, sampling and analysis."""
    seed = cfg.require_seed()
    spec = cfg.spec
    files: dict[str, Path] = {}
    h = lambda name, **kw: header(cfg, f"pipeline:{name}", **kw)  # noqa: E731

    def stage(name, fn):
        try:
            return fn()
        except Exception as exc:  # tag and re-raise; earlier artifacts stay on disk
            raise RuntimeError(f"pipeline stage '{name}' failed: {exc}") from exc

    gs, gs_rep = stage("ground_state", lambda: stage_gs(cfg))
    files["gs"] = write_json(out / "ground_state.json", gs_rep, h("ground_state"))
    files["gs_qasm"] = write_file(out / "ground_state.qasm", gs_circuit(spec, gs).to_qasm(), h("ground_state"))

    params = stage("optimize", lambda: stage_optimize(cfg))
    files["params"] = write_file(out / "ansatz_params.csv", params.to_records(),
                                 h("optimize", vacuum_handling=VACUUM_NOTE))

    table = stage("cmn", lambda: build_cmn(spec, cfg.wave_packet, params))
    files["cmn"] = write_file(out / "cmn.csv", table.to_csv(), h("cmn"))

    circ = stage("circuit", lambda: wp_circuit(spec, table, cfg.n_trotter, cfg.theta_c, gs=gs))
    files["qasm"] = write_file(out / "circuit.qasm", circ.to_qasm(), h("circuit"))
    files["circuit_meta"] = write_file(out / "circuit.json", circ.metadata_json() + "\n", None)

    def simulate():
        H = hamiltonian_matrix(spec)
        _, omega = ground_state(spec, H)
        exact = wavepacket_exact(spec, cfg.wave_packet, params, omega=omega)
        ideal_c = wp_circuit(spec, table, 10, 0.0)
        ideal = restrict(spec, run(ideal_c, embed(spec, omega, 0)), 1)
        state = run(circ)
        trunc = restrict(spec, state, 1)
        if cfg.noise_1q or cfg.noise_2q:
            shots = depolarize(circ, cfg.noise_1q, cfg.noise_2q, seed).sample(cfg.n_shots)
        else:
            shots = sample(state, cfg.n_shots, seed)
        return H, omega, exact, ideal, trunc, shots

    H, omega, exact, ideal, trunc, shots = stage("simulate", simulate)
    files["shots"] = write_file(out / "shots.csv", shots.to_csv(), h("simulate"))

    def analyze():
        mit = mitigate(shots, spec)
        boot = bootstrap(shots, spec, n_resamples=cfg.n_resamples, seed=seed)
        return mit, boot

    mit, boot = stage("analyze", analyze)
    p_exact = np.abs(exact) ** 2
    p_ideal = normalized(np.abs(ideal) ** 2)
    p_trunc = normalized(np.abs(trunc) ** 2)
    rows = ["label,exact,ideal,trunc,mitigated,stderr"]
    for i in range(len(p_exact)):
        rows.append(f"{i},{p_exact[i]:.15g},{p_ideal[i]:.15g},{p_trunc[i]:.15g},"
                    f"{mit.probabilities[i]:.15g},{boot.prob_std[i]:.15g}")
    files["probabilities"] = write_file(out / "probabilities.csv", "\n".join(rows) + "\n", h("analyze"))

    dens = {name: staggered_density(spec, p) for name, p in
            (("exact", p_exact), ("ideal", p_ideal), ("trunc", p_trunc))}
    drows = ["site,exact,ideal,trunc,mitigated,stderr"]
    for n in range(spec.n_sites):
        drows.append(f"{n},{dens['exact'].chi[n]:.15g},{dens['ideal'].chi[n]:.15g},{dens['trunc'].chi[n]:.15g},"
                     f"{boot.chi.chi[n]:.15g},{boot.chi.stderr[n]:.15g}")
    files["density"] = write_file(out / "density.csv", "\n".join(drows) + "\n", h("analyze"))

    f_trunc, de_trunc = trunc_metrics(trunc / np.linalg.norm(trunc), exact, H)
    f_ideal, _ = trunc_metrics(ideal / np.linalg.norm(ideal), exact, H)
    enc = encoding_diagnostics(spec, table, omega)
    report = {
        "ground_state": gs_rep,
        "cnot": {"circuit": circ.cnot_count, "predicted": circ.metadata["predicted_cnot"],
                 "per_sweep": circ.metadata["cnot_per_sweep"], "n_summands": circ.metadata["n_summands"],
                 "full_closed_form": predict_gate_counts(spec, "full", cfg.n_trotter)[1]},
        "fidelity": {"trunc": f_trunc, "ideal": f_ideal, "delta_e_trunc": de_trunc},
        "ancilla1_probability": float(np.linalg.norm(trunc) ** 2),
        "encoding": asdict(enc),
        "shots": {"total": mit.n_shots, "physical": mit.n_physical, "ancilla1": mit.n_ancilla1},
        "rms": {"mitigated_vs_trunc": rms_error(mit.probabilities, p_trunc),
                "trunc_vs_exact": rms_error(p_trunc, p_exact)},
        "bootstrap_resamples": boot.n_resamples,
    }
    files["report"] = write_json(out / "report.json", report, h("report"))
    return Bundle(files, report)


def _sweep_point(args) -> list[str]:
    cfg, m_f, eps = args
    spec = replace(cfg, m_f=m_f, epsilon=eps).spec
    params = optimize_all(spec)
    label = classify_k0_excitation(spec).label.value
    return [f"{m_f:.15g},{eps:.15g},{s.k:.15g},{s.fidelity:.15g},{label}" for s in params]


def run_sweep(cfg: RunConfig, m_grid: list[float], e_grid: list[float], out: Path) -> Path:
    points = [(cfg, m, e) for m in m_grid for e in e_grid]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            results = list(ex.map(_sweep_point, points))
    else:
        results = [_sweep_point(p) for p in points]
    rows = ["m_f,epsilon,k,fidelity,classification"] + [r for res in results for r in res]
    return write_file(out / "heatmap.csv", "\n".join(rows) + "\n",
                      header(cfg, "sweep", m_f_grid=m_grid, epsilon_grid=e_grid))


# --------------------------------------------------------------------------
# Argument parsing

def _grid(text: str) -> list[float]:
    return [_number(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="RNG seed (required for sampling)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--group", choices=["Z2", "U1", "z2", "u1"])
    common.add_argument("--n-sites", dest="n_sites", type=int)
    common.add_argument("--m-f", dest="m_f", type=_number)
    common.add_argument("--epsilon", type=_number)
    common.add_argument("--cutoff", type=int, help="U(1) flux cutoff")
    common.add_argument("--sigma", type=_number, help="wave-packet width (pi/6 style accepted)")
    common.add_argument("--mu", type=_number)
    common.add_argument("--k0", type=_number)
    common.add_argument("--theta-c", dest="theta_c", type=_number)
    common.add_argument("--n-trotter", dest="n_trotter", type=int)
    common.add_argument("--n-shots", dest="n_shots", type=int)
    common.add_argument("--n-resamples", dest="n_resamples", type=int)
    common.add_argument("--noise-1q", dest="noise_1q", type=_number)
    common.add_argument("--noise-2q", dest="noise_2q", type=_number)
    common.add_argument("--no-header", action="store_true", help="omit the header block (stdout only)")

    p = argparse.ArgumentParser(prog="lgtwave", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"lgtwave {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("basis", parents=[common], help="physical basis CSV")
    sub.add_parser("hamiltonian", parents=[common], help="Hamiltonian nonzeros on the physical basis")
    sub.add_parser("spectrum", parents=[common], help="momentum-resolved spectrum and k=0 classification")
    sub.add_parser("optimize", parents=[common], help="optimize the k-sector ansatz")
    c = sub.add_parser("cmn", parents=[common], help="wave-packet coefficients C_mn")
    c.add_argument("--params", help="ansatz parameter CSV (optimized when absent)")
    c = sub.add_parser("circuit", parents=[common], help="export circuits")
    c.add_argument("--mode", choices=["gs", "wp", "full", "predict"], default="wp",
                   help="gs: vacuum only; wp: truncated at theta_c; full: theta_c = 0; predict: closed-form counts")
    c.add_argument("--params", help="ansatz parameter CSV (optimized when absent)")
    s = sub.add_parser("simulate", parents=[common], help="run the state-preparation circuit and sample shots")
    s.add_argument("--params", help="ansatz parameter CSV (optimized when absent)")
    a = sub.add_parser("analyze", parents=[common], help="mitigate and bootstrap a shot CSV")
    a.add_argument("shots", help="shot CSV written by simulate")
    sub.add_parser("pipeline", parents=[common], help="all stages end to end")
    w = sub.add_parser("sweep", parents=[common], help="(m_f, epsilon) fidelity heat map")
    w.add_argument("--m-f-grid", default="0.5,1,1.5,2")
    w.add_argument("--epsilon-grid", default="-0.1,-0.3,-0.6,-1,-2")
    return p


def _emit(args, cfg: RunConfig, name: str, body: str, command: str, **extra):
    h = None if args.no_header else header(cfg, command, **extra)
    if args.out:
        path = write_file(Path(args.out) / name, body, h)
        print(path)
    else:
        sys.stdout.write((_header_lines(h) if h else "") + body)


def _params(args, cfg: RunConfig) -> AnsatzParams:
    if getattr(args, "params", None):
        return AnsatzParams.from_records(strip_header(Path(args.params).read_text()))
    return stage_optimize(cfg)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    cmd = args.command
    try:
        if cmd == "basis":
            _emit(args, cfg, "basis.csv", stage_basis(cfg), cmd)
        elif cmd == "hamiltonian":
            _emit(args, cfg, "hamiltonian.csv", stage_hamiltonian(cfg), cmd)
        elif cmd == "spectrum":
            body, rep = stage_spectrum(cfg)
            _emit(args, cfg, "spectrum.csv", body, cmd, **rep)
        elif cmd == "optimize":
            _emit(args, cfg, "ansatz_params.csv", stage_optimize(cfg).to_records(), cmd, vacuum_handling=VACUUM_NOTE)
        elif cmd == "cmn":
            _emit(args, cfg, "cmn.csv", build_cmn(cfg.spec, cfg.wave_packet, _params(args, cfg)).to_csv(), cmd)
        elif cmd == "circuit":
            _circuit_cmd(args, cfg)
        elif cmd == "simulate":
            seed = cfg.require_seed()
            spec = cfg.spec
            gs, _ = vqe_ground_state(spec)
            table = build_cmn(spec, cfg.wave_packet, _params(args, cfg))
            circ = wp_circuit(spec, table, cfg.n_trotter, cfg.theta_c, gs=gs)
            if cfg.noise_1q or cfg.noise_2q:
                rec = depolarize(circ, cfg.noise_1q, cfg.noise_2q, seed).sample(cfg.n_shots)
            else:
                rec = sample(run(circ), cfg.n_shots, seed)
            _emit(args, cfg, "shots.csv", rec.to_csv(), cmd)
        elif cmd == "analyze":
            rec = read_shots(Path(args.shots).read_text(), cfg.seed)
            boot = bootstrap(rec, cfg.spec, n_resamples=cfg.n_resamples, seed=cfg.require_seed())
            _emit(args, cfg, "analysis.csv", boot.to_csv() + "\n" + boot.chi.to_csv(), cmd,
                  events=rec.n_shots, physical=boot.n_events, kept=boot.n_kept)
        elif cmd == "pipeline":
            out = Path(args.out or cfg.out)
            bundle = run_pipeline(cfg, out)
            for path in bundle.files.values():
                print(path)
        elif cmd == "sweep":
            out = Path(args.out or cfg.out)
            print(run_sweep(cfg, _grid(args.m_f_grid), _grid(args.epsilon_grid), out))
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _circuit_cmd(args, cfg: RunConfig):
    spec = cfg.spec
    if args.mode == "predict":
        rows = ["mode,n_qubits,cnot"]
        for mode in ("gs", "full", "one_meson_truncated"):
            q, c = predict_gate_counts(spec, mode, cfg.n_trotter)
            rows.append(f"{mode},{q},{c}")
        _emit(args, cfg, "gate_counts.csv", "\n".join(rows) + "\n", "circuit")
        return
    gs, _ = vqe_ground_state(spec)
    if args.mode == "gs":
        circ = gs_circuit(spec, gs)
    else:
        table = build_cmn(spec, cfg.wave_packet, _params(args, cfg))
        theta_c = 0.0 if args.mode == "full" else cfg.theta_c
        circ = wp_circuit(spec, table, cfg.n_trotter, theta_c, gs=gs)
    h = None if args.no_header else header(cfg, "circuit", mode=args.mode)
    if args.out:
        out = Path(args.out)
        write_file(out / f"{args.mode}.qasm", circ.to_qasm(), h)
        write_file(out / f"{args.mode}_gates.txt", circ.to_gate_list(), h)
        write_file(out / f"{args.mode}.json", circ.metadata_json() + "\n", None)
        print(out / f"{args.mode}.qasm")
    else:
        sys.stdout.write(circ.to_qasm())


if __name__ == "__main__":
    raise SystemExit(main())
