"""Benchmark harness: timing sweeps written as CSV plus rendered figures.

Each suite mirrors one of the performance studies the stack is calibrated
against: signature aggregation/verification scaling, ABE key-generation and
per-policy encryption cost, Paillier key-generation growth and size-invariant
encryption, and ledger throughput/latency under varying endorsement policies.
Absolute times are hardware-dependent; the shapes are the point.
"""

from __future__ import annotations

import statistics
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import absa, maabe, paillier
from .absa import AttributeStatement
from .ledger import EndorsementPolicy, LedgerConfig, PeerProfile, load_reports_csv, run_load
from .pairing import default_params
from .policy import expand_ranges, parse_policy, policy_attributes

__all__ = ["bench_absa", "bench_abe", "bench_paillier", "bench_ledger", "run_suite"]


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _ms(fn, repeats: int = 1) -> float:
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best.append((time.perf_counter() - t0) * 1000.0)
    return statistics.median(best)


def bench_absa(out_dir: Path, sizes=(10, 100, 1000)) -> Path:
    """Aggregation grows with n; verification stays flat."""
    params = default_params()
    attr = AttributeStatement("bench", "attr", "v")
    h = attr.hashed()
    rows = ["n,aggregate_sig_ms,aggregate_vk_ms,verify_ms"]
    agg_t, vk_t, ver_t = [], [], []
    for n in sizes:
        auths = [absa.absa_authority_setup(params, attr) for _ in range(n)]
        keys = [absa.absa_extract(params, f"gid", attr, a) for a in auths]
        vks = [k.verification_key(params) for k in keys]
        sigs = [absa.absa_sign(k, attr) for k in keys]
        t_agg = _ms(lambda: absa.aggregate_signatures(sigs, vks))
        t_vk = _ms(lambda: absa.aggregate_verification_keys(vks))
        agg = absa.aggregate_signatures(sigs, vks)
        vk = absa.aggregate_verification_keys(vks)
        t_ver = _ms(lambda: absa.absa_verify(h, agg, vk, params), repeats=3)
        rows.append(f"{n},{t_agg:.3f},{t_vk:.3f},{t_ver:.3f}")
        agg_t.append(t_agg)
        vk_t.append(t_vk)
        ver_t.append(t_ver)
    csv_path = out_dir / "absa.csv"
    _write(csv_path, "\n".join(rows) + "\n")

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sizes, agg_t, "o-", label="signature aggregation")
    ax.plot(sizes, vk_t, "s-", label="verification key aggregation")
    ax.plot(sizes, ver_t, "^-", label="verification")
    ax.set_xscale("log")
    ax.set_xlabel("individual signatures")
    ax.set_ylabel("time (ms)")
    ax.legend()
    ax.set_title("Aggregation scales with n; verification does not")
    fig.tight_layout()
    fig.savefig(out_dir / "absa_times.png", dpi=120)
    plt.close(fig)
    return csv_path


def bench_abe(out_dir: Path, attr_counts=(2, 4, 6, 8, 10), policy_runs: int = 10) -> Path:
    """Key-generation linearity and per-policy encryption/decryption cost."""
    gp = maabe.abe_global_setup()
    registry = maabe.AuthorityRegistry()
    labels = [f"Attr{i}" for i in range(max(attr_counts))]
    for label in labels:
        registry.add(gp, label)
    rows = ["attributes,keygen_ms"]
    keygen_t = []
    for count in attr_counts:
        t = _ms(
            lambda: [
                maabe.abe_keygen(gp, "bench-user", labels[i], registry.master_key(labels[i]))
                for i in range(count)
            ]
        )
        rows.append(f"{count},{t:.3f}")
        keygen_t.append(t)
    csv_path = out_dir / "abe_keygen.csv"
    _write(csv_path, "\n".join(rows) + "\n")

    policies = {
        "(Doctor or Nurse)": {"Nurse"},
        "(Floor in (2-5))": {"Floor=3"},
        "((Doctor or Nurse) and (Floor in (2-5)))": {"Nurse", "Floor=3"},
    }
    prows = ["policy,encrypt_ms,decrypt_ms"]
    enc_t, dec_t = [], []
    for text, owned in policies.items():
        ast = expand_ranges(parse_policy(text))
        registry2 = maabe.AuthorityRegistry()
        for label in policy_attributes(parse_policy(text)):
            registry2.add(gp, label)
        pks = registry2.public_keys()
        keys = {
            label: maabe.abe_keygen(gp, "bench-user", label, registry2.master_key(label))
            for label in owned
        }
        enc_samples, dec_samples = [], []
        for _ in range(policy_runs):
            t0 = time.perf_counter()
            ct, kappa = maabe.abe_encrypt(gp, ast, pks, text)
            enc_samples.append((time.perf_counter() - t0) * 1000)
            t0 = time.perf_counter()
            maabe.abe_decrypt(gp, ct, keys, "bench-user")
            dec_samples.append((time.perf_counter() - t0) * 1000)
        e, d = statistics.median(enc_samples), statistics.median(dec_samples)
        prows.append(f'"{text}",{e:.3f},{d:.3f}')
        enc_t.append(e)
        dec_t.append(d)
    _write(out_dir / "abe_policies.csv", "\n".join(prows) + "\n")

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(attr_counts, keygen_t, "o-")
    ax1.set_xlabel("attributes")
    ax1.set_ylabel("key generation (ms)")
    ax1.set_title("Key generation vs. attribute count")
    x = range(len(policies))
    width = 0.38
    ax2.bar([i - width / 2 for i in x], enc_t, width, label="encrypt")
    ax2.bar([i + width / 2 for i in x], dec_t, width, label="decrypt")
    ax2.set_xticks(list(x))
    ax2.set_xticklabels(["or-policy", "range", "combined"])
    ax2.set_ylabel("time (ms)")
    ax2.set_title("Cost by access policy")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "abe_times.png", dpi=120)
    plt.close(fig)
    return csv_path


def bench_paillier(out_dir: Path, bit_sizes=(128, 256, 512, 1024, 2048), keygen_reps: int = 3) -> Path:
    """Key-generation growth by modulus size; size-invariant encrypt/decrypt."""
    rows = ["bits,keygen_ms,enc_ms,dec_ms"]
    keygen_t, enc_t, dec_t = [], [], []
    for bits in bit_sizes:
        kg = _ms(lambda: paillier.paillier_keygen(bits), repeats=keygen_reps)
        pk, sk = paillier.paillier_keygen(bits)
        m = 1234 % pk.n
        e = _ms(lambda: paillier.paillier_encrypt(pk, m), repeats=5)
        ct = paillier.paillier_encrypt(pk, m)
        d = _ms(lambda: paillier.paillier_decrypt(sk, pk, ct), repeats=5)
        rows.append(f"{bits},{kg:.3f},{e:.3f},{d:.3f}")
        keygen_t.append(kg)
        enc_t.append(e)
        dec_t.append(d)
    csv_path = out_dir / "paillier.csv"
    _write(csv_path, "\n".join(rows) + "\n")

    pk, sk = paillier.paillier_keygen(1024)
    mrows = ["message_bits,enc_ms,dec_ms"]
    msizes = [4, 6, 8, 10, 12]
    menc, mdec = [], []
    for mbits in msizes:
        m = (1 << mbits) - 1
        e = _ms(lambda: paillier.paillier_encrypt(pk, m), repeats=7)
        ct = paillier.paillier_encrypt(pk, m)
        d = _ms(lambda: paillier.paillier_decrypt(sk, pk, ct), repeats=7)
        mrows.append(f"{mbits},{e:.3f},{d:.3f}")
        menc.append(e)
        mdec.append(d)
    _write(out_dir / "paillier_message_sizes.csv", "\n".join(mrows) + "\n")

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(bit_sizes, keygen_t, "o-")
    ax1.set_xlabel("key bits")
    ax1.set_ylabel("key generation (ms)")
    ax1.set_xscale("log", base=2)
    ax1.set_title("Key generation vs. modulus size")
    ax2.plot([2**b for b in msizes], menc, "o-", label="encrypt")
    ax2.plot([2**b for b in msizes], mdec, "s-", label="decrypt")
    ax2.set_xscale("log", base=2)
    ax2.set_xlabel("message magnitude")
    ax2.set_ylabel("time (ms)")
    ax2.set_title("Message size does not move encrypt/decrypt")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "paillier_times.png", dpi=120)
    plt.close(fig)
    return csv_path


def bench_ledger(
    out_dir: Path,
    rates=(5, 10, 20, 30, 40, 50),
    ks=(1, 2, 3),
    duration_s: float = 30.0,
    seed: int = 7,
) -> Path:
    """Throughput and latency sweeps across send rates and endorsement policies."""
    peers = [PeerProfile(f"peer{i}") for i in range(max(ks))]
    peer_ids = tuple(p.peer_id for p in peers)
    reports = []
    for k in ks:
        for rate in rates:
            reports.append(
                run_load(rate, duration_s, EndorsementPolicy(k, peer_ids), peers, LedgerConfig(seed=seed))
            )
    csv_path = out_dir / "ledger.csv"
    _write(csv_path, load_reports_csv(reports))

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for k in ks:
        rs = [r for r in reports if r.policy_k == k]
        ax1.plot([r.send_rate_tps for r in rs], [r.throughput_avg_tps for r in rs], "o-", label=f"{k}-of-any")
        ax2.plot([r.send_rate_tps for r in rs], [r.latency_avg_ms / 1000 for r in rs], "o-", label=f"{k}-of-any")
    ax1.set_xlabel("send rate (tps)")
    ax1.set_ylabel("avg throughput (tps)")
    ax1.set_title("Throughput vs. send rate")
    ax1.legend()
    ax2.set_xlabel("send rate (tps)")
    ax2.set_ylabel("avg latency (s)")
    ax2.set_title("Latency vs. send rate")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "ledger_times.png", dpi=120)
    plt.close(fig)
    return csv_path


_SUITES = {
    "absa": bench_absa,
    "abe": bench_abe,
    "paillier": bench_paillier,
    "ledger": bench_ledger,
}


def run_suite(name: str, out_dir: Path) -> Path:
    try:
        suite = _SUITES[name]
    except KeyError:
        raise ValueError(f"unknown bench suite {name!r}; choose from {sorted(_SUITES)}") from None
    return suite(Path(out_dir))
