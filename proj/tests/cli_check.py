#!/usr/bin/env python3
"""CLI contract: exit codes, report payloads and schema validity.

usage: cli_check.py <steinvb> <schema.json> <scratch-dir>
"""
import json
import os
import subprocess
import sys

import jsonschema

cli, schema_path, scratch = sys.argv[1:4]
os.makedirs(scratch, exist_ok=True)
with open(schema_path) as f:
    schema = json.load(f)
validator = jsonschema.Draft7Validator(schema)

failures = []
count = 0


def run(name, args, code, check=None, env=None):
    global count
    count += 1
    out = os.path.join(scratch, name + ".json")
    if os.path.exists(out):
        os.remove(out)
    full = [cli] + args + ["--out", out, "--quiet"] if code != 2 or "--out" in args else [cli] + args
    e = dict(os.environ)
    e.pop("STEIN_BOUNDS_SEED", None)
    if env:
        e.update(env)
    p = subprocess.run(full, capture_output=True, text=True, env=e)
    if p.returncode != code:
        failures.append(f"{name}: exit {p.returncode}, expected {code}\n{p.stderr.strip()}")
        return None
    if code == 2:
        return None
    with open(out) as f:
        rep = json.load(f)
    errors = sorted(validator.iter_errors(rep), key=lambda e: list(e.path))
    if errors:
        failures.append(f"{name}: schema: {errors[0].message} at {list(errors[0].path)}")
    if check:
        try:
            check(rep)
        except AssertionError as exc:
            failures.append(f"{name}: {exc}")
    return rep


def close(a, b, tol):
    assert a is not None and abs(a - b) <= tol, f"{a} vs {b}"


def first(rep):
    return rep["reports"][0]


def hyp(report, name):
    for h in report["hypotheses"]:
        if h["name"] == name:
            return h
    raise AssertionError(f"no hypothesis {name!r}")


# kernel
run("kernel_beta", ["kernel", "--dist", "beta:4,8", "--route", "pearson", "--x", "0.5"], 0,
    lambda r: close(r["kernel"][0]["tau"], 0.25 / 12, 1e-12))
run("kernel_gauss", ["kernel", "--dist", "gaussian:0,1", "--route", "integral", "--x", "0"], 0,
    lambda r: close(r["kernel"][0]["tau"], 1.0, 1e-8))
run("kernel_pareto", ["kernel", "--dist", "pareto:3,1", "--route", "integral", "--x", "2"], 0,
    lambda r: close(r["kernel"][0]["tau"], 1.0, 1e-6))
run("kernel_smoothed", ["kernel", "--dist", "rademacher", "--route", "smoothed", "--eps", "1", "--x", "0"], 0,
    lambda r: close(r["kernel"][0]["tau"], 2.410686135, 1e-6))
run("kernel_grid", ["kernel", "--dist", "gamma:2,1", "--points", "16"], 0,
    lambda r: (len(r["kernel"]) == 16 and r["variance_check"]["holds"]) or (_ for _ in ()).throw(AssertionError("grid")))
run("kernel_bad_dist", ["kernel", "--dist", "gaussian:0", "--x", "0"], 2)
run("kernel_bad_family", ["kernel", "--dist", "nosuch:1", "--x", "0"], 2)

# bound
def cac(r):
    b = first(r)
    close(b["lower"], 1.0, 1e-9)
    close(b["upper"], 1.0, 1e-9)


run("bound_cacoullos", ["bound", "--dist", "gaussian:0,1", "--g", "x", "--method", "cacoullos"], 0, cac)


def eqa(r):
    b = first(r)
    close(b["upper"], 1.0, 1e-9)
    assert hyp(b, "NBUE")["holds"]
    assert b["hypotheses_hold"]


run("bound_equilibrium_a", ["bound", "--dist", "exp:1", "--g", "x", "--method", "equilibrium-a"], 0, eqa)
run("bound_convex_withheld", ["bound", "--dist", "exp:1", "--g", "x", "--method", "convex"], 3,
    lambda r: first(r)["upper"] is None or (_ for _ in ()).throw(AssertionError("upper emitted")))
run("bound_smoothed_ii", ["bound", "--dist", "rademacher", "--eps", "0.5", "--g", "x", "--method", "smoothed-ii"], 3)
run("bound_smoothed_i", ["bound", "--dist", "rademacher", "--eps", "0.5", "--g", "x", "--method", "smoothed-i"], 0,
    lambda r: close(first(r)["upper"], 1.25, 1e-6))
run("bound_named", ["bound", "--dist", "two-point:1,1", "--g-named", "square", "--method", "zero-bias"], 0,
    lambda r: close(first(r)["upper"], 4.0 / 3.0, 1e-9))
run("bound_generic", ["bound", "--dist", "gaussian:0,1", "--g", "x^2", "--method", "generic", "--mc", "200000"], 0,
    lambda r: close(first(r)["upper"], 4.0, 0.1))
run("bound_remainder", ["bound", "--dist", "convolution:30*standardized-bernoulli:0.3,30", "--g", "sin(x)",
                        "--method", "zero-bias-remainder", "--gap", "0.115538765566"], 0,
    lambda r: close(first(r)["upper"], 0.6797203254, 1e-8))
run("bound_remainder_nogap", ["bound", "--dist", "gaussian:0,1", "--g", "x", "--method", "zero-bias-remainder"], 2)
run("bound_bad_expr", ["bound", "--dist", "gaussian:0,1", "--g", "x +", "--method", "cacoullos"], 2)
run("bound_bad_method", ["bound", "--dist", "gaussian:0,1", "--g", "x", "--method", "nope"], 2)
run("bound_env_seed", ["bound", "--dist", "gaussian:0,1", "--g", "x", "--method", "cacoullos", "--mc", "10000"], 0,
    lambda r: (r["seed"] == 1234 and first(r)["mc"]["seed"] == 1234) or (_ for _ in ()).throw(AssertionError("seed")),
    env={"STEIN_BOUNDS_SEED": "1234"})
run("bound_env_bad", ["bound", "--dist", "gaussian:0,1", "--g", "x", "--method", "cacoullos"], 2,
    env={"STEIN_BOUNDS_SEED": "abc"})


# posterior
def beta48(r):
    assert r["posterior"]["posterior"] == "beta:4,8"
    close(first(r)["upper"], 0.017094017094, 1e-11)


run("posterior_binomial", ["posterior", "--pair", "binomial-beta", "--alpha", "1", "--beta", "1", "--n", "10",
                           "--x", "3", "--g", "x"], 0, beta48)


def gam21(r):
    assert r["posterior"]["posterior"] == "gamma:2,1"
    close(first(r)["lower"], 2.0, 1e-9)
    close(first(r)["upper"], 2.0, 1e-9)


run("posterior_poisson", ["posterior", "--pair", "poisson-gamma", "--alpha", "2", "--beta", "1", "--n", "0",
                          "--sum", "0", "--g", "x"], 0, gam21)


def par82(r):
    assert r["posterior"]["posterior"] == "pareto:8,2"
    assert any("sign convention" in n for n in first(r)["notes"])
    close(first(r)["upper"], 8 * 4 / (49 * 6), 1e-9)


run("posterior_pareto", ["posterior", "--pair", "uniform-pareto", "--alpha", "3", "--beta", "1", "--n", "5",
                         "--max", "2", "--g", "x"], 0, par82)
run("posterior_data", ["posterior", "--pair", "binomial-beta", "--data", "1,0,0,1,0,0,0,0,1,0"], 0,
    lambda r: r["posterior"]["posterior"] == "beta:4,8" or (_ for _ in ()).throw(AssertionError("data")))
run("posterior_wrong_stat", ["posterior", "--pair", "uniform-pareto", "--n", "5", "--sum", "2"], 2)
run("posterior_bad_pair", ["posterior", "--pair", "nope", "--n", "1", "--stat", "1"], 2)
run("posterior_impossible", ["posterior", "--pair", "binomial-beta", "--n", "3", "--x", "5"], 2)

# verify
run("verify_bernoulli", ["verify", "bernoulli-sum", "--n", "30", "--p", "0.3", "--seed", "1"], 0,
    lambda r: r["passed"] or (_ for _ in ()).throw(AssertionError("scenario failed")))
run("verify_unknown", ["verify", "unknown-id"], 2)
run("verify_bad_param", ["verify", "bernoulli-sum", "--bogus", "1"], 2)
# linear g makes the remainder bound tight, so the strict-margin assertion must fail
run("verify_fail", ["verify", "bernoulli-sum", "--g", "x", "--mc", "100000"], 5)

# csv
count += 1
csv_out = os.path.join(scratch, "bound.csv")
p = subprocess.run([cli, "bound", "--dist", "gaussian:0,1", "--g", "x", "--method", "cacoullos", "--format", "csv",
                    "--out", csv_out, "--quiet", "--mc", "10000"], capture_output=True, text=True)
if p.returncode != 0:
    failures.append(f"csv: exit {p.returncode}")
else:
    with open(csv_out) as f:
        lines = f.read().splitlines()
    if lines[0] != "method,lower,upper,mc_var,ci,hypotheses,remainder,seed" or not lines[1].startswith("cacoullos,1,1,"):
        failures.append(f"csv: unexpected content {lines[:2]}")

for f in failures:
    print("FAIL", f)
print(f"{count - len(failures)}/{count} CLI checks passed")
sys.exit(1 if failures else 0)
