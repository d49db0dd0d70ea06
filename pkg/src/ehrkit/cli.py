"""`ehr` command line: drive a persistent deployment from the shell.

State lives under a data directory (--data-dir or $EHR_DATA_DIR, default
./ehr-data).  Every command loads the deployment, applies its change, runs
the ledger to quiescence, and saves.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import bench as bench_mod
from .absa import AttributeStatement, ThresholdSpec
from .dagstore import Cid, ExpiredTokenError, NotFoundError
from .maabe import AuthenticationError, PolicyNotSatisfiedError
from .paillier import paillier_encrypt
from .persistence import data_dir_from_env, init_data_dir, load_system, save_system
from .policy import Operation, PolicyError
from .workflow import Role, TOKEN_URI_SCHEME, WorkflowError


_CLI_ERRORS = (WorkflowError, PolicyError, NotFoundError, ExpiredTokenError, FileNotFoundError, ValueError)


def _system(ctx):
    data_dir = data_dir_from_env(ctx.obj.get("data_dir"))
    try:
        return load_system(data_dir), data_dir
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc))


class _DomainErrorGroup(click.Group):
    """Surface domain errors as clean messages instead of tracebacks."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.exceptions.Exit:
            raise
        except click.ClickException:
            raise
        except _CLI_ERRORS as exc:
            raise click.ClickException(str(exc))


@click.group(cls=_DomainErrorGroup)
@click.option("--data-dir", envvar="EHR_DATA_DIR", default=None, help="Deployment directory.")
@click.pass_context
def main(ctx, data_dir):
    """Hybrid ledger-edge EHR toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["data_dir"] = data_dir


@main.command()
@click.option("--peers", default=3, show_default=True, help="Number of endorsing peers.")
@click.option("--k", "endorsement_k", default=2, show_default=True, help="Endorsement threshold.")
@click.option("--seed", default=0, show_default=True)
@click.pass_context
def setup(ctx, peers, endorsement_k, seed):
    """Initialize a fresh deployment in the data directory."""
    data_dir = data_dir_from_env(ctx.obj.get("data_dir"))
    try:
        init_data_dir(data_dir, n_peers=peers, endorsement_k=endorsement_k, seed=seed)
    except FileExistsError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"initialized deployment at {data_dir}")


@main.group()
def authority():
    """Manage attribute authorities."""


@authority.command("add")
@click.argument("attribute")
@click.pass_context
def authority_add(ctx, attribute):
    """Register an encryption authority for ATTRIBUTE (e.g. Doctor or Floor=3)."""
    system, data_dir = _system(ctx)
    system.add_abe_authority(attribute)
    save_system(system, data_dir)
    click.echo(f"authority registered for {attribute}")


def _parse_attr(text: str) -> AttributeStatement:
    # authority:name=value, value optional
    if ":" not in text:
        raise click.BadParameter(f"attribute {text!r} must look like authority:name[=value]")
    authority_id, rest = text.split(":", 1)
    name, _, value = rest.partition("=")
    return AttributeStatement(authority_id, name, value)


@main.command()
@click.option("--role", type=click.Choice([r.value for r in Role]), required=True)
@click.option("--name", "display_name", required=True)
@click.option("--org", "organization", required=True)
@click.option("--attr", "attrs", multiple=True, help="authority:name[=value]; repeatable.")
@click.pass_context
def register(ctx, role, display_name, organization, attrs):
    """Register a participant and issue all key material."""
    system, data_dir = _system(ctx)
    participant = system.register_participant(
        Role(role), display_name, organization, [_parse_attr(a) for a in attrs]
    )
    save_system(system, data_dir)
    click.echo(f"registered {display_name} with GID {participant.gid}")
    for name in sorted(participant.absa_material):
        click.echo(f"  attribute {name}: signature aggregated")


@main.command()
@click.option("--patient", "patient_gid", required=True)
@click.option("--in", "in_file", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--policy", "policy_text", required=True)
@click.option("--claim", "claims", multiple=True, help="name=value; repeatable.")
@click.option("--insurer", "insurer_gid", default=None, help="GID of the insurer for claim fields.")
@click.pass_context
def upload(ctx, patient_gid, in_file, policy_text, claims, insurer_gid):
    """Encrypt a record under an access policy and store it off-chain."""
    system, data_dir = _system(ctx)
    claim_values = {}
    for claim in claims:
        name, _, value = claim.partition("=")
        if not value.lstrip("-").isdigit():
            raise click.BadParameter(f"claim {claim!r} must be name=integer")
        claim_values[name] = int(value)
    insurer_pk = None
    if claim_values:
        if insurer_gid is None:
            raise click.ClickException("--claim requires --insurer")
        insurer = system.participants.get(insurer_gid)
        if insurer is None or insurer.paillier_public is None:
            raise click.ClickException(f"no insurer keys for GID {insurer_gid}")
        insurer_pk = insurer.paillier_public
    record = system.upload_ehr(
        patient_gid, in_file.read_bytes(), policy_text, claim_values, insurer_pk
    )
    save_system(system, data_dir)
    click.echo(f"stored record for patient {patient_gid}")
    click.echo(f"  cid: {record.root_cid.text()}")
    click.echo(f"  policy: {record.policy_text}")


@main.command()
@click.option("--as", "requestor_gid", required=True)
@click.option("--patient", "patient_gid", required=True)
@click.option("--operation", default="READ", type=click.Choice([o.value for o in Operation]))
@click.option("--threshold", default=None, help="t/n signature threshold, e.g. 3/3.")
@click.pass_context
def request(ctx, requestor_gid, patient_gid, operation, threshold):
    """Request access; prints a one-time token URI or the deny reason."""
    system, data_dir = _system(ctx)
    spec = None
    if threshold:
        t, _, n = threshold.partition("/")
        spec = ThresholdSpec(int(t), int(n))
    grant = system.request_access(requestor_gid, patient_gid, Operation(operation), spec)
    save_system(system, data_dir)
    if grant.allowed:
        click.echo(f"ALLOW ({grant.decision.rule_id})")
        click.echo(grant.token_uri)
    else:
        click.echo(f"DENY ({grant.decision.rule_id}): {grant.decision.reason}")
        sys.exit(1)


@main.command()
@click.option("--as", "requestor_gid", required=True)
@click.option("--token", required=True)
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None)
@click.pass_context
def retrieve(ctx, requestor_gid, token, out_file):
    """Redeem a one-time token and decrypt with the requestor's keys."""
    system, data_dir = _system(ctx)
    try:
        plaintext = system.retrieve_and_decrypt(requestor_gid, token)
    except PolicyNotSatisfiedError as exc:
        save_system(system, data_dir)
        raise click.ClickException(f"token consumed; decryption refused: {exc}")
    except AuthenticationError as exc:
        save_system(system, data_dir)
        raise click.ClickException(f"payload failed authentication: {exc}")
    save_system(system, data_dir)
    if out_file:
        out_file.write_bytes(plaintext)
        click.echo(f"wrote {len(plaintext)} bytes to {out_file}")
    else:
        click.echo(plaintext.decode("utf-8", errors="replace"))


@main.command("claim-check")
@click.option("--insurer", "insurer_gid", required=True)
@click.option("--patient", "patient_gid", required=True)
@click.option("--field", "field_name", required=True)
@click.option("--value", type=int, required=True)
@click.pass_context
def claim_check(ctx, insurer_gid, patient_gid, field_name, value):
    """Encrypted claim equality test; never touches the record payload."""
    system, data_dir = _system(ctx)
    insurer = system.participants.get(insurer_gid)
    if insurer is None or insurer.paillier_public is None:
        raise click.ClickException(f"no insurer keys for GID {insurer_gid}")
    claimed = paillier_encrypt(insurer.paillier_public, value)
    matched = system.claim_check(insurer_gid, patient_gid, field_name, claimed)
    save_system(system, data_dir)
    click.echo("claim settled" if matched else "no claim can be determined")
    if not matched:
        sys.exit(1)


@main.command()
@click.option("--patient", "patient_gid", default=None)
@click.option("--requestor", default=None)
@click.pass_context
def events(ctx, patient_gid, requestor):
    """List committed access events."""
    system, _ = _system(ctx)
    rows = system.events(patient_gid=patient_gid, requestor=requestor)
    if not rows:
        click.echo("no events")
        return
    for e in rows:
        token = e.one_time_token_id or "-"
        click.echo(
            f"{e.event_id[:8]}  t={e.timestamp:9.1f}ms  {e.requestor} -> {e.patient_gid}"
            f"  {e.operation}  {e.decision}  rule={e.rule_id}  token={token}"
        )


@main.group()
def store():
    """Raw access to the content-addressed store."""


@store.command("put")
@click.argument("file", type=click.Path(exists=True, path_type=Path))
@click.pass_context
def store_put(ctx, file):
    system, data_dir = _system(ctx)
    cid = system.dag.put_blob(file.read_bytes())
    save_system(system, data_dir)
    click.echo(cid.text())


@store.command("get")
@click.argument("cid")
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None)
@click.pass_context
def store_get(ctx, cid, out_file):
    system, _ = _system(ctx)
    data = system.dag.get_blob(Cid.from_text(cid))
    if out_file:
        out_file.write_bytes(data)
        click.echo(f"wrote {len(data)} bytes to {out_file}")
    else:
        sys.stdout.buffer.write(data)


@store.command("token")
@click.argument("cid")
@click.pass_context
def store_token(ctx, cid):
    system, data_dir = _system(ctx)
    token = system.tokens.issue(Cid.from_text(cid))
    save_system(system, data_dir)
    click.echo(f"{TOKEN_URI_SCHEME}://{token.token_id}")


@store.command("redeem")
@click.argument("token")
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None)
@click.pass_context
def store_redeem(ctx, token, out_file):
    system, data_dir = _system(ctx)
    token_id = token.split("://", 1)[1] if "://" in token else token
    data = system.tokens.redeem(token_id)
    save_system(system, data_dir)
    if out_file:
        out_file.write_bytes(data)
        click.echo(f"wrote {len(data)} bytes to {out_file}")
    else:
        sys.stdout.buffer.write(data)


@main.command()
@click.argument("suite", type=click.Choice(["absa", "abe", "paillier", "ledger"]))
@click.option("--out-dir", type=click.Path(path_type=Path), default=Path("bench-out"), show_default=True)
def bench(suite, out_dir):
    """Run a benchmark suite; writes CSV and PNG figures."""
    csv_path = bench_mod.run_suite(suite, out_dir)
    click.echo(f"wrote {csv_path}")
    for fig in sorted(Path(out_dir).glob("*.png")):
        click.echo(f"wrote {fig}")


if __name__ == "__main__":
    main()
