import random

import numpy as np
import pytest

from aglens.cert.boolean import PremiseError
from aglens.cert.plfun import ComparisonClassError, PLFun
from aglens.cert.quant import (
    CertifiedQuantLens,
    LexPair,
    QuantCertificate,
    QuantLens,
    certify_quant_lens,
    check_quant_certificate,
    compose_quant_cert,
    compose_quant_lens,
    identity_certified_lens,
    identity_quant_lens,
    lex_geq,
    lex_leq,
    sequential_certificate,
    sum_bundle_predicates,
    zero_certificate,
)
from aglens.core import InterfaceMismatch
from aglens.expr import Call, Var, eval_expr
from aglens.grid import SamplePlan
from aglens.test_utils import random_quant_pair

o1, o2, a1, a2 = Var("o1"), Var("o2"), Var("a1"), Var("a2")


def sequential(kappa, step=0.05):
    plan = SamplePlan.uniform(["o1", "o2", "a1"], -2.0, 2.0, step)
    return sequential_certificate(2 * o1**2, a1**2, o1**2, a1**2, kappa, plan)


def test_lex_order():
    assert lex_leq(LexPair(1, -5), LexPair(0, 100))
    assert not lex_leq(LexPair(1, 1), LexPair(1, 2))
    assert lex_leq(LexPair(1, 2), LexPair(1, 2))
    assert LexPair(1, 2) >= LexPair(1, 2)
    assert LexPair(0, 100) <= LexPair(1, -5)
    # Ties within the band are decided by the tangent
    assert lex_geq(LexPair(1 + 1e-10, 0), LexPair(1, 1)) is False


@pytest.mark.parametrize("seed", range(10))
def test_lex_order_properties(seed):
    rng = random.Random(seed)
    values = [0.0, 1.0, 2.0]
    pairs = [LexPair(rng.choice(values), rng.choice(values)) for _ in range(30)]
    for p in pairs:
        assert lex_leq(p, p)
        for q in pairs:
            if lex_leq(p, q) and lex_leq(q, p):
                assert p == q
            if p.base > q.base:
                assert lex_leq(p, q)
            for r in pairs:
                if lex_leq(p, q) and lex_leq(q, r):
                    assert lex_leq(p, r)


def test_quant_lens_scope():
    with pytest.raises(InterfaceMismatch, match="undeclared variable"):
        QuantLens((1, 1), (1, 1), (o2,), (a1,))
    with pytest.raises(InterfaceMismatch, match="2 components, expected 1"):
        QuantLens((1, 1), (1, 1), (o1, o1), (a1,))
    with pytest.raises(InterfaceMismatch, match="undeclared"):
        QuantCertificate(1, 1, a1**2, a1**2)


def test_compose_quant_lens():
    w = QuantLens((1, 1), (1, 1), (2 * o1,), (a1 + o1,))
    t = QuantLens((1, 1), (1, 1), (o1 + 1,), (3 * a1,))
    composite = compose_quant_lens(t, w)
    env = {"o1": 0.5, "a1": 2.0}
    assert eval_expr(composite.fwd[0], env) == 2.0
    assert eval_expr(composite.bwd[0], env) == 6.5
    assert compose_quant_lens(identity_quant_lens(1, 1), w) == w


def test_identity_lens_holds_with_zero_margin():
    cert = QuantCertificate(1, 1, o1**2, a1**2)
    plan = SamplePlan.uniform(["o1", "a1"], -1.0, 1.0, 0.1)
    verdict = identity_certified_lens(cert, plan).certify()
    assert verdict
    assert verdict.worst_margin == 0.0


def test_sequential_example():
    verdict = sequential(PLFun.identity()).certify()
    assert verdict
    assert verdict.worst_margin >= -1e-8
    assert verdict.grid["samples"] == 81**3

    verdict = sequential(PLFun.zero()).certify()
    assert not verdict
    assert verdict.failed == "assumption"
    assert verdict.worst_margin == pytest.approx(-4.0)
    assert abs(verdict.witness_point["o1"]) == 2.0


def test_sequential_jobs():
    certified = sequential(PLFun.zero(), step=0.25)
    assert certified.certify() == certified.certify(jobs=3)


def test_slack_must_be_kinf0():
    certified = sequential(PLFun.from_points([(0, 1)], 1), step=0.5)
    with pytest.raises(ComparisonClassError, match="The slack"):
        certified.certify()


def test_certify_dimension_errors():
    cert = QuantCertificate(1, 1, o1**2, a1**2)
    wide = QuantCertificate(2, 1, o1**2 + o2**2, a1**2)
    plan = SamplePlan.uniform(["o1", "a1"], -1.0, 1.0, 0.5)
    lens = identity_quant_lens(1, 1)
    with pytest.raises(InterfaceMismatch, match="source certificate"):
        certify_quant_lens(lens, wide, cert, PLFun.zero(), plan)
    with pytest.raises(ValueError, match="misses a1"):
        certify_quant_lens(
            lens, cert, cert, PLFun.zero(), SamplePlan.uniform(["o1"], -1, 1, 0.5)
        )


def test_compose_with_identity():
    certified = sequential(PLFun.identity(), step=0.25)
    plan = SamplePlan.uniform(["o1", "a1"], -2.0, 2.0, 0.25)
    identity = identity_certified_lens(certified.dst_cert, plan)
    composite = compose_quant_cert(identity, certified)
    assert composite.slack == PLFun.identity()
    assert composite.certify()


def test_slacks_add():
    certified = sequential(PLFun.identity(), step=0.25)
    plan = SamplePlan.uniform(["o1", "a1"], -2.0, 2.0, 0.25)
    loose = CertifiedQuantLens(
        identity_quant_lens(1, 1),
        certified.dst_cert,
        certified.dst_cert,
        PLFun.identity(),
        plan,
    )
    composite = compose_quant_cert(loose, certified)
    assert composite.slack == PLFun.linear(2)
    assert composite.certify()

    zero = identity_certified_lens(certified.dst_cert, plan)
    assert compose_quant_cert(loose, zero).slack == PLFun.identity()


def test_compose_premise_failure():
    failing = sequential(PLFun.zero(), step=0.5)
    plan = SamplePlan.uniform(["o1", "a1"], -2.0, 2.0, 0.5)
    identity = identity_certified_lens(failing.dst_cert, plan)
    with pytest.raises(PremiseError, match="the inner lens is not certified"):
        compose_quant_cert(identity, failing)
    with pytest.raises(InterfaceMismatch):
        compose_quant_cert(failing, identity)


@pytest.mark.parametrize("seed", range(200))
def test_slack_addition_soundness(seed):
    inner, outer = random_quant_pair(random.Random(seed))
    first, second = inner.certify(), outer.certify()
    assert first and second
    composite = compose_quant_cert(outer, inner)
    assert composite.slack == inner.slack + outer.slack
    verdict = composite.certify()
    assert verdict
    assert verdict.worst_margin >= -1e-8


def test_sum_bundle_predicates():
    first = QuantCertificate(1, 1, o1**2, a1**2)
    assert sum_bundle_predicates(first, zero_certificate(0, 0)) == first

    second = QuantCertificate(1, 0, Call("abs", (o1,)), Var("o1") * 0)
    total = sum_bundle_predicates(first, second)
    assert total.dims == (2, 1)
    assert eval_expr(total.gamma, {"o1": 2.0, "o2": -3.0}) == 7.0

    plan = SamplePlan.uniform(["o1", "o2"], -1.0, 1.0, 0.25)
    assert check_quant_certificate(total, plan)


def test_check_quant_certificate():
    plan = SamplePlan.uniform(["o1", "a1"], -1.0, 1.0, 0.25)
    assert check_quant_certificate(QuantCertificate(1, 1, o1**2, a1**2), plan)

    shifted = check_quant_certificate(QuantCertificate(1, 1, o1**2 + 1, a1**2), plan)
    assert shifted.failed == "guarantee base point"

    flat = check_quant_certificate(QuantCertificate(1, 1, o1**2 - o1, a1**2), plan)
    assert flat.failed == "definiteness"
    assert 0 < flat.witness_point["o1"] <= 1
    assert np.isclose(flat.worst_margin, -0.25, atol=1e-9)
