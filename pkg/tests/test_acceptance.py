"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one `ACCEPTANCE <n> PASS|FAIL` line (run with `pytest -s`
to stream them).  Absolute wall-clock numbers from the reference hardware are
never targets; the asserted properties are exact outcomes, orderings, ratios,
and bounded spreads.
"""

import itertools
import random
import statistics
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import pytest

from ehrkit import absa, maabe, paillier
from ehrkit.absa import AttributeStatement, ThresholdSpec
from ehrkit.dagstore import DagStore, ExpiredTokenError, IntegrityError, TokenRegistry
from ehrkit.ledger import EndorsementPolicy, LedgerConfig, PeerProfile, run_load
from ehrkit.policy import (
    And,
    Leaf,
    Operation,
    Or,
    evaluate_policy,
    expand_ranges,
    parse_policy,
    policy_attributes,
)
from ehrkit.workflow import EhrSystem, Role


def _report(criterion: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"acceptance criterion {criterion} failed: {detail}"


def _median_ms(fn, repeats: int) -> float:
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1000.0)
    return statistics.median(samples)


SCENARIO_POLICY = "(Doctor or Nurse) and (Floor in (2-5))"


def test_criterion_1_clinical_policy_scenario(gp):
    """Alice's attribute set decrypts, Charlie's fails; exact booleans, < 1 s."""
    registry = maabe.AuthorityRegistry()
    labels = (
        {"Female", "Nurse", "RespSpecialist", "Male", "Doctor", "Cardiologist"}
        | policy_attributes(parse_policy(SCENARIO_POLICY))
    )
    for label in sorted(labels):
        registry.add(gp, label)
    alice = {
        a: maabe.abe_keygen(gp, "alice", a, registry.master_key(a))
        for a in ("Female", "Nurse", "Floor=3", "RespSpecialist")
    }
    charlie = {
        a: maabe.abe_keygen(gp, "charlie", a, registry.master_key(a))
        for a in ("Male", "Doctor", "Floor=5", "Cardiologist")
    }
    ast = expand_ranges(parse_policy(SCENARIO_POLICY))

    t0 = time.perf_counter()
    ct, kappa = maabe.abe_encrypt(gp, ast, registry.public_keys(), SCENARIO_POLICY)
    alice_ok = maabe.abe_decrypt(gp, ct, alice, "alice") == kappa
    charlie_ok = True
    try:
        maabe.abe_decrypt(gp, ct, charlie, "charlie")
        charlie_ok = False
    except maabe.PolicyNotSatisfiedError:
        pass
    elapsed = time.perf_counter() - t0

    ok = alice_ok and charlie_ok and elapsed < 1.0
    _report(1, ok, f"alice decrypts={alice_ok}, charlie fails={charlie_ok}, runtime={elapsed:.2f}s (< 1 s)")


def test_criterion_2_lsss_brute_force_equivalence(gp):
    """>= 200 monotone formulas x all 2^6 subsets: decryption success == satisfaction."""
    names = ["A", "B", "C", "D", "E", "F"]
    registry = maabe.AuthorityRegistry()
    for name in names:
        registry.add(gp, name)
    pks = registry.public_keys()
    keys = {n: maabe.abe_keygen(gp, "subject", n, registry.master_key(n)) for n in names}

    rng = random.Random(0xACCE47)

    def leaves(ast):
        if isinstance(ast, Leaf):
            return 1
        return leaves(ast.left) + leaves(ast.right)

    def formula(depth=0):
        if depth >= 3 or rng.random() < 0.42:
            return Leaf(rng.choice(names))
        node = And if rng.random() < 0.5 else Or
        return node(formula(depth + 1), formula(depth + 1))

    corpus = []
    while len(corpus) < 200:
        ast = formula()
        if leaves(ast) <= 6:
            corpus.append(ast)

    t0 = time.perf_counter()
    mismatches = 0
    checked = 0
    for ast in corpus:
        ct, kappa = maabe.abe_encrypt(gp, ast, pks)
        for bits in range(64):
            owned = {names[i] for i in range(6) if bits >> i & 1}
            expected = evaluate_policy(ast, owned)
            try:
                got = maabe.abe_decrypt(gp, ct, {n: keys[n] for n in owned}, "subject") == kappa
            except maabe.PolicyNotSatisfiedError:
                got = False
            checked += 1
            if got != expected:
                mismatches += 1
    elapsed = time.perf_counter() - t0

    ok = mismatches == 0 and checked == len(corpus) * 64 and elapsed < 300.0
    _report(
        2,
        ok,
        f"{len(corpus)} formulas x 64 subsets = {checked} decrypt attempts, "
        f"{mismatches} mismatches, runtime={elapsed:.0f}s (< 300 s)",
    )


def test_criterion_3_threshold_scenarios(params):
    """(3,3) accepts only the full set; (1,3) accepts any one — all 8 subsets."""
    attributes = {
        "patient_id": AttributeStatement("Mercy", "patient_id", "0003231"),
        "driver_license": AttributeStatement("DMV", "driver_license", "9907184"),
        "insurance_id": AttributeStatement("BlueSafeguard", "insurance_id", "1EG4-TE5-MK72"),
    }
    bundles = {}
    for name, attr in attributes.items():
        auth = absa.absa_authority_setup(params, attr)
        key = absa.absa_extract(params, "annie", attr, auth)
        vk = key.verification_key(params)
        sig = absa.absa_sign(key, attr)
        bundles[name] = (
            attr,
            absa.aggregate_signatures([sig], [vk]),
            absa.aggregate_verification_keys([vk]),
        )
    researcher, doctor = ThresholdSpec(3, 3), ThresholdSpec(1, 3)
    failures = []
    for present in itertools.chain.from_iterable(
        itertools.combinations(attributes, r) for r in range(4)
    ):
        verified = set()
        for name, (attr, agg, vk_agg) in bundles.items():
            if name in present:
                if absa.absa_verify(attr.hashed(), agg, vk_agg, params):
                    verified.add(name)
            else:
                # Holder cannot produce this attribute: simulate with a foreign hash.
                wrong = AttributeStatement("Forged", name, "x").hashed()
                if absa.absa_verify(wrong, agg, vk_agg, params):
                    verified.add(name)
        want_researcher = len(present) == 3
        want_doctor = len(present) >= 1
        if absa.threshold_check(verified, researcher) != want_researcher:
            failures.append((present, "3-of-3"))
        if absa.threshold_check(verified, doctor) != want_doctor:
            failures.append((present, "1-of-3"))
    _report(3, not failures, f"all 8 subsets exact for (3,3) and (1,3); failures={failures}")


@pytest.fixture(scope="module")
def aggregate_family(params):
    """Signature/key material for n in {100, 1000} plus a 10-signature aggregate."""
    attr = AttributeStatement("bench", "attr", "1")
    out = {}
    authorities = [absa.absa_authority_setup(params, attr) for _ in range(1000)]
    keys = [absa.absa_extract(params, "holder", attr, a) for a in authorities]
    vks = [k.verification_key(params) for k in keys]
    sigs = [absa.absa_sign(k, attr) for k in keys]
    for n in (10, 100, 1000):
        out[n] = (sigs[:n], vks[:n])
    return attr, out


def test_criterion_4_verify_time_flatness(params, aggregate_family):
    """Verify cost for 10 vs 1000 aggregated signatures differs by < 20%."""
    attr, family = aggregate_family
    h = attr.hashed()
    material = {}
    for n in (10, 1000):
        sigs, vks = family[n]
        agg = absa.aggregate_signatures(sigs, vks)
        vk_agg = absa.aggregate_verification_keys(vks)
        assert absa.absa_verify(h, agg, vk_agg, params)
        material[n] = (agg, vk_agg)
    # Interleave the two measurement streams so load drift hits both equally.
    samples = {10: [], 1000: []}
    for _ in range(21):
        for n in (10, 1000):
            agg, vk_agg = material[n]
            t0 = time.perf_counter()
            absa.absa_verify(h, agg, vk_agg, params)
            samples[n].append((time.perf_counter() - t0) * 1000.0)
    t10, t1000 = statistics.median(samples[10]), statistics.median(samples[1000])
    spread = abs(t1000 - t10) / min(t10, t1000)
    ok = spread < 0.20
    _report(4, ok, f"verify medians: n=10 {t10:.1f}ms, n=1000 {t1000:.1f}ms, diff {spread:.1%} (< 20%)")


def test_criterion_5_aggregation_linearity(params, aggregate_family):
    """Aggregation runtime ratio for n=1000 vs n=100 lies in [5, 20]."""
    attr, family = aggregate_family
    times = {}
    for n in (100, 1000):
        sigs, vks = family[n]
        times[n] = _median_ms(lambda: absa.aggregate_signatures(sigs, vks), repeats=5)
    ratio = times[1000] / times[100]
    ok = 5.0 <= ratio <= 20.0
    _report(5, ok, f"aggregate medians: n=100 {times[100]:.0f}ms, n=1000 {times[1000]:.0f}ms, ratio {ratio:.1f} in [5, 20]")


def test_criterion_6_claim_matching():
    """claimMatch agrees with plaintext equality on 1000 random pairs + boundary."""
    pk, sk = paillier.paillier_keygen(1024)
    rng = random.Random(0x61A1)
    disagreements = 0
    for i in range(1000):
        a = rng.randrange(1, 10**9)
        b = a if i % 2 == 0 else rng.randrange(1, 10**9)
        got = paillier.claim_match(
            paillier.paillier_encrypt(pk, a), paillier.paillier_encrypt(pk, b), sk, pk
        )
        disagreements += got != (a == b)
    boundary_equal = paillier.claim_match(
        paillier.paillier_encrypt(pk, 1500), paillier.paillier_encrypt(pk, 1500), sk, pk
    )
    boundary_unequal = paillier.claim_match(
        paillier.paillier_encrypt(pk, 1500), paillier.paillier_encrypt(pk, 1501), sk, pk
    )
    ok = disagreements == 0 and boundary_equal and not boundary_unequal
    _report(6, ok, f"1000 randomized pairs, {disagreements} disagreements; boundary pair exact")


def test_criterion_7_paillier_shapes():
    """keygen(2048)/keygen(1024) > 2; enc/dec spread < 20% across 2^4..2^12."""
    kg = {
        bits: _median_ms(lambda: paillier.paillier_keygen(bits), repeats=7)
        for bits in (1024, 2048)
    }
    growth = kg[2048] / kg[1024]

    pk, sk = paillier.paillier_keygen(1024)
    magnitudes = (4, 6, 8, 10, 12)
    ciphertexts = {e: paillier.paillier_encrypt(pk, 2**e) for e in magnitudes}
    enc_samples = {e: [] for e in magnitudes}
    dec_samples = {e: [] for e in magnitudes}
    # Interleave magnitudes within each round so drift cannot masquerade as
    # message-size dependence.
    for _ in range(25):
        for e in magnitudes:
            t0 = time.perf_counter()
            paillier.paillier_encrypt(pk, 2**e)
            enc_samples[e].append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            paillier.paillier_decrypt(sk, pk, ciphertexts[e])
            dec_samples[e].append(time.perf_counter() - t0)
    enc_times = [statistics.median(enc_samples[e]) for e in magnitudes]
    dec_times = [statistics.median(dec_samples[e]) for e in magnitudes]
    enc_spread = (max(enc_times) - min(enc_times)) / min(enc_times)
    dec_spread = (max(dec_times) - min(dec_times)) / min(dec_times)
    ok = growth > 2.0 and enc_spread < 0.20 and dec_spread < 0.20
    _report(
        7,
        ok,
        f"keygen growth 2048/1024 = {growth:.1f} (> 2); enc spread {enc_spread:.1%}, "
        f"dec spread {dec_spread:.1%} (< 20%)",
    )


def test_criterion_8_keygen_linearity(gp):
    """MA-ABE keygen time for 10 vs 2 attributes in ratio [3, 8]."""
    registry = maabe.AuthorityRegistry()
    labels = [f"Attr{i}" for i in range(10)]
    for label in labels:
        registry.add(gp, label)
    msks = {label: registry.master_key(label) for label in labels}

    def issue(count):
        return [maabe.abe_keygen(gp, "user", label, msks[label]) for label in labels[:count]]

    t2 = _median_ms(lambda: issue(2), repeats=9)
    t10 = _median_ms(lambda: issue(10), repeats=9)
    ratio = t10 / t2
    ok = 3.0 <= ratio <= 8.0
    _report(8, ok, f"keygen medians: 2 attrs {t2:.1f}ms, 10 attrs {t10:.1f}ms, ratio {ratio:.1f} in [3, 8]")


def test_criterion_9_encryption_cost_ordering(gp):
    """t(or-policy) < t(range) <= t(combined) for encryption and decryption."""
    cases = {
        "simple": ("(Doctor or Nurse)", {"Nurse"}),
        "range": ("(Floor in (2-5))", {"Floor=3"}),
        "combined": (SCENARIO_POLICY, {"Nurse", "Floor=3"}),
    }
    registry = maabe.AuthorityRegistry()
    for text, _ in cases.values():
        for label in policy_attributes(parse_policy(text)):
            if label not in registry:
                registry.add(gp, label)
    pks = registry.public_keys()
    enc, dec = {}, {}
    for name, (text, owned) in cases.items():
        ast = expand_ranges(parse_policy(text))
        keys = {label: maabe.abe_keygen(gp, "u", label, registry.master_key(label)) for label in owned}
        enc_samples, dec_samples = [], []
        for _ in range(50):
            t0 = time.perf_counter()
            ct, kappa = maabe.abe_encrypt(gp, ast, pks, text)
            enc_samples.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            assert maabe.abe_decrypt(gp, ct, keys, "u") == kappa
            dec_samples.append(time.perf_counter() - t0)
        enc[name] = statistics.median(enc_samples) * 1000
        dec[name] = statistics.median(dec_samples) * 1000
    ok = (
        enc["simple"] < enc["range"] <= enc["combined"]
        and dec["simple"] < dec["range"] <= dec["combined"]
    )
    _report(
        9,
        ok,
        "median over 50 runs — enc: "
        f"{enc['simple']:.0f} < {enc['range']:.0f} <= {enc['combined']:.0f} ms; dec: "
        f"{dec['simple']:.0f} < {dec['range']:.0f} <= {dec['combined']:.0f} ms",
    )


def test_criterion_10_ledger_ordering_and_latency():
    """Throughput ordered by k at 30 tps; latency monotone in rate; deterministic."""
    peers = [PeerProfile(f"peer{i}") for i in range(3)]
    peer_ids = tuple(p.peer_id for p in peers)
    config = LedgerConfig(seed=7)

    tput = {
        k: run_load(30, 30, EndorsementPolicy(k, peer_ids), peers, config).throughput_avg_tps
        for k in (1, 2, 3)
    }
    ordering_ok = tput[1] > tput[2] > tput[3]

    monotone_ok = True
    for k in (1, 2, 3):
        latencies = [
            run_load(rate, 30, EndorsementPolicy(k, peer_ids), peers, config).latency_avg_ms
            for rate in (5, 10, 20, 30, 40, 50)
        ]
        if any(latencies[i] > latencies[i + 1] for i in range(len(latencies) - 1)):
            monotone_ok = False

    a = run_load(30, 20, EndorsementPolicy(2, peer_ids), peers, config)
    b = run_load(30, 20, EndorsementPolicy(2, peer_ids), peers, config)
    deterministic_ok = a == b

    ok = ordering_ok and monotone_ok and deterministic_ok
    _report(
        10,
        ok,
        f"throughput at 30 tps: k=1 {tput[1]:.1f} > k=2 {tput[2]:.1f} > k=3 {tput[3]:.1f}; "
        f"latency monotone per k: {monotone_ok}; seed-deterministic: {deterministic_ok}",
    )


def test_criterion_11_end_to_end_audit():
    """6 access attempts -> exactly 6 committed events; deny case; chain verifies; < 30 s."""
    t0 = time.perf_counter()
    system = EhrSystem()
    identity = lambda org, pid: [
        AttributeStatement(org, "patient_id", pid),
        AttributeStatement("DMV", "driver_license", f"DL-{pid}"),
        AttributeStatement("Blue", "insurance_id", f"INS-{pid}"),
    ]
    carmen = system.register_participant(Role.PATIENT, "Carmen Maxwell", "Mercy", identity("Mercy", "0001"))
    laverne = system.register_participant(Role.PATIENT, "Laverne Green", "Mercy", identity("Mercy", "0002"))
    doctor = system.register_participant(
        Role.DOCTOR, "Dr. Mercy", "Mercy",
        [AttributeStatement("Mercy", "Doctor"), AttributeStatement("Mercy", "Floor", "3")],
    )
    researcher = system.register_participant(Role.RESEARCHER, "Rhea", "Lab", [])
    insurer = system.register_participant(Role.INSURER, "Blue", "Blue", [])

    system.upload_ehr(laverne.gid, b"laverne chart", SCENARIO_POLICY, {"amount": 1500}, insurer.paillier_public)
    system.upload_ehr(carmen.gid, b"carmen chart", "Doctor", {"amount": 900}, insurer.paillier_public)

    baseline = len(system.events())
    grants = [
        system.request_access(doctor.gid, laverne.gid, Operation.READ, ThresholdSpec(1, 3)),   # ALLOW
        system.request_access(doctor.gid, carmen.gid, Operation.READ, ThresholdSpec(1, 3)),    # ALLOW
        system.request_access(researcher.gid, laverne.gid, Operation.READ, ThresholdSpec(3, 3)),  # ALLOW
        system.request_access(carmen.gid, laverne.gid, Operation.READ),                        # DENY (cross-patient)
        system.request_access(researcher.gid, laverne.gid, Operation.WRITE),                   # DENY (no WRITE rule)
        system.request_access(laverne.gid, laverne.gid, Operation.READ),                       # ALLOW (self)
    ]
    events = system.events()
    event_count_ok = len(events) - baseline == 6
    carmen_deny = next(
        e for e in events if e.requestor == carmen.gid and e.patient_gid == laverne.gid
    )
    deny_ok = carmen_deny.decision == "DENY" and not grants[3].allowed

    retrieved = 0
    for grant, requestor in ((grants[0], doctor.gid), (grants[5], laverne.gid)):
        if grant.allowed:
            try:
                system.retrieve_and_decrypt(requestor, grant.token_uri)
                retrieved += 1
            except maabe.PolicyNotSatisfiedError:
                pass
    allows = len([e for e in events if e.decision == "ALLOW"])
    conservation_ok = retrieved <= allows

    chain_ok = system.ledger.verify_chain()
    elapsed = time.perf_counter() - t0
    ok = event_count_ok and deny_ok and conservation_ok and chain_ok and elapsed < 30.0
    _report(
        11,
        ok,
        f"6 attempts -> {len(events) - baseline} committed events; cross-patient request denied={deny_ok}; "
        f"retrievals {retrieved} <= {allows} allows; chain verified={chain_ok}; runtime={elapsed:.1f}s (< 30 s)",
    )


def test_criterion_12_dagstore_integrity():
    """Per-chunk avalanche on a 3 MiB blob; loud corruption; one concurrent winner."""
    dag = DagStore()
    rng = random.Random(0xD46)
    data = bytes(rng.getrandbits(8) for _ in range(3 * 1024 * 1024))
    root = dag.put_blob(data)
    n_chunks = len(dag.leaf_cids(root))

    avalanche_ok = True
    for chunk_index in range(n_chunks):
        mutated = bytearray(data)
        mutated[chunk_index * dag.chunk_size] ^= 0x01
        if dag.put_blob(bytes(mutated)) == root:
            avalanche_ok = False

    victim = dag.leaf_cids(root)[2]
    raw = dag.store.get(victim.digest)
    dag.store._blocks[victim.digest] = raw[:-1] + bytes([raw[-1] ^ 1])
    corruption_ok = False
    try:
        dag.get_blob(root)
    except IntegrityError:
        corruption_ok = True
    dag.store._blocks[victim.digest] = raw

    registry = TokenRegistry(dag)
    token = registry.issue(root)
    barrier = threading.Barrier(16)

    def race(_):
        barrier.wait()
        try:
            registry.redeem(token.token_id)
            return 1
        except ExpiredTokenError:
            return 0

    with ThreadPoolExecutor(16) as pool:
        winners = sum(pool.map(race, range(16)))

    ok = avalanche_ok and corruption_ok and winners == 1
    _report(
        12,
        ok,
        f"{n_chunks} per-chunk perturbations all moved the root; corrupted chunk raised "
        f"IntegrityError={corruption_ok}; 16-way redemption winners={winners} (== 1)",
    )
