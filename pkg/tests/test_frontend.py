from fractions import Fraction

import pytest

from volta_mini import corpus
from volta_mini import symexpr as sx
from volta_mini.frontend import (
    ConfigError,
    ElaborationError,
    KernelSyntaxError,
    LaunchConfig,
    StructuredCtaError,
    elaborate,
    parse_kernel,
    validate_structured,
)
from volta_mini.frontend.parser import For, SyncAll
from volta_mini.ir import Addr, BinOp, Load, Program, SetConst, Store, Sync, UnOp

SOFTMAX = corpus.path("softmax_naive.mk").read_text()


def elab(src, threads=4, **kw):
    return elaborate(parse_kernel(src), LaunchConfig(threads, **kw))


# -- parsing ------------------------------------------------------------------


def test_minimal_kernel():
    ast = parse_kernel("kernel k { out y[1]; y[0] = 1; }")
    assert ast.name == "k"
    assert len(ast.body) == 1


def test_softmax_ast_shape():
    ast = parse_kernel(SOFTMAX)
    assert ast.count_stmts(For) == 1
    assert ast.count_stmts(SyncAll) == 1


def test_unbalanced_brace_location():
    with pytest.raises(KernelSyntaxError) as ei:
        parse_kernel("kernel k {\n  out y[1];\n  y[0] = 1;\n")
    assert ei.value.line == 4


@pytest.mark.parametrize(
    "src",
    [
        "kernel k { out y[1]; out y[2]; }",
        "kernel k { out y[1]; float a = 1; float a = 2; }",
        "kernel k { out y[1]; y[0] = q; }",
        "kernel k { out y[1]; z[0] = 1; }",
    ],
)
def test_declaration_errors(src):
    with pytest.raises(KernelSyntaxError):
        parse_kernel(src)


def test_comments_and_cuda_spellings():
    src = """
    kernel k {   /* block comment */
      in x[2];
      out y[2];
      // line comment
      float v = __expf(x[tid]);
      __syncthreads();
      y[tid] = fmaxf(v, INFINITY * 0 + 1);
    }
    """
    with pytest.raises(ElaborationError, match="negative infinity"):
        elab(src, threads=2)
    ok = src.replace("INFINITY * 0 + 1", "1")
    p = elab(ok, threads=2)
    assert any(isinstance(s, Sync) for s in p.threads[0])


# -- elaboration --------------------------------------------------------------


def test_softmax_matches_per_thread_expansion():
    p = elab(SOFTMAX, params={"N": 4})
    everyone = frozenset(range(4))
    for tid, prog in enumerate(p.threads):
        kinds = [type(s).__name__ for s in prog]
        stores = [s for s in prog if isinstance(s, Store)]
        assert [s.addr for s in stores] == [Addr("buf", tid), Addr("y", tid)]
        syncs = [s for s in prog if isinstance(s, Sync)]
        assert [s.tids for s in syncs] == [everyone]
        buf_loads = [s.addr for s in prog if isinstance(s, Load) and s.addr.array == "buf"]
        assert buf_loads == [Addr("buf", i) for i in range(4)] + [Addr("buf", tid)]
        assert sum(isinstance(s, BinOp) and s.op == "add" for s in prog) == 4
        assert sum(isinstance(s, BinOp) and s.op == "div" for s in prog) == 1
        assert kinds.count("Sync") == 1


def test_tid_guard_folds_per_thread():
    p = elab("kernel k { in x[4]; out y[4]; if (tid < 2) y[tid] = x[tid]; }")
    assert [len(t) for t in p.threads] == [2, 2, 0, 0]
    assert isinstance(p.threads[0][0], Load) and isinstance(p.threads[1][1], Store)


def test_data_dependent_branch_rejected():
    with pytest.raises(StructuredCtaError) as ei:
        elab("kernel k { in x[4]; out y[4]; if (x[0] > 0) y[tid] = 1; }")
    assert ei.value.reason == "data-dependent branch"


def test_data_dependent_address_rejected():
    with pytest.raises(StructuredCtaError) as ei:
        elab("kernel k { in x[4]; out y[4]; float i = x[0]; y[i] = 1; }")
    assert ei.value.reason == "data-dependent address"


def test_non_static_loop_bound_rejected():
    with pytest.raises(StructuredCtaError) as ei:
        elab("kernel k { in x[4]; out y[4]; float n = x[0]; for (int i = 0; i < n; i++) y[tid] = 1; }")
    assert ei.value.reason == "non-static loop bound"


def test_unroll_cap():
    src = "kernel k { out y[1]; float a = 0; for (int i = 0; i < 100000; i++) a += 1; y[0] = a; }"
    with pytest.raises(StructuredCtaError) as ei:
        elaborate(parse_kernel(src), LaunchConfig(1), max_stmts=1000)
    assert ei.value.reason == "recursion/unbounded construct"


def test_syncwarp_mask_across_warps_rejected():
    src = "kernel k { out y[8]; __syncwarp(1, 0xff); y[tid] = 0; }"
    with pytest.raises(StructuredCtaError) as ei:
        elab(src, threads=8, warp_size=4)
    assert ei.value.reason == "out-of-range tid set"


def test_syncwarp_forms():
    src = "kernel k { out y[8]; __syncwarp(); y[tid] = 0; }"
    p = elab(src, threads=8, warp_size=4)
    assert p.threads[5][0].tids == frozenset({4, 5, 6, 7})
    src = "kernel k { out y[8]; if (tid >= 4 && tid < 6) { syncwarp(1, 0x3); } y[tid] = 0; }"
    p = elab(src, threads=8, warp_size=4)
    assert p.threads[4][0].tids == frozenset({4, 5})


def test_early_return_truncates():
    src = "kernel k { in x[4]; out y[4]; if (tid == 1) return; y[tid] = x[tid]; }"
    p = elab(src)
    assert len(p.threads[1]) == 0 and len(p.threads[0]) == 2


def test_data_constants_are_exact_rationals():
    p = elab("kernel k { out y[1]; y[0] = 1 / 3; }", threads=1)
    (c, st) = p.threads[0]
    assert isinstance(c, SetConst) and c.value is sx.const(Fraction(1, 3))


def test_integer_division_truncates_toward_zero():
    p = elab("kernel k { out y[4]; int i = (0 - 7) / 2 + 5; y[i] = 1; }", threads=1)
    assert p.threads[0][-1].addr == Addr("y", 2)


def test_elaboration_is_deterministic():
    a = elab(SOFTMAX, params={"N": 4})
    b = elab(SOFTMAX, params={"N": 4})
    assert a == b


def test_all_addresses_concrete_in_corpus():
    for pair in corpus.pairs():
        cfg = LaunchConfig.load(pair.config)
        for which, path in (("a", pair.a), ("b", pair.b)):
            p = elaborate(parse_kernel(path.read_text()), cfg.for_kernel(which))
            for prog in p.threads:
                for s in prog:
                    if isinstance(s, (Load, Store)):
                        assert isinstance(s.addr.offset, int)


# -- validate_structured ------------------------------------------------------


def test_validate_elaborated_softmax():
    cfg = LaunchConfig(4, params={"N": 4})
    validate_structured(elaborate(parse_kernel(SOFTMAX), cfg), cfg)


def test_validate_sync_outside_launch():
    p = Program(tuple((Sync(frozenset(range(64))),) for _ in range(32)), {})
    with pytest.raises(StructuredCtaError) as ei:
        validate_structured(p, LaunchConfig(32))
    assert ei.value.reason == "out-of-range tid set"


def test_validate_sync_spanning_warps():
    # zero-based warp windows: {16..47} straddles warps 0 and 1 with W=32
    I = frozenset(range(16, 48))
    threads = tuple((Sync(I),) if t in I else () for t in range(64))
    with pytest.raises(StructuredCtaError):
        validate_structured(Program(threads, {}), LaunchConfig(64))
    ok = frozenset(range(32, 64))
    threads = tuple((Sync(ok),) if t in ok else () for t in range(64))
    validate_structured(Program(threads, {}), LaunchConfig(64))


# -- launch configs -----------------------------------------------------------


def test_config_roundtrip_and_overrides():
    cfg = LaunchConfig.load(corpus.path("matmul.cfg"))
    assert cfg.threads == 16 and cfg.params == {"M": 4, "K": 4, "P": 4}
    assert cfg.for_kernel("a").threads == 1
    assert cfg.for_kernel("b").threads == 16


@pytest.mark.parametrize(
    "text",
    [
        "threads = 0",
        "warp_size = 4",
        "threads = 2\nbogus = 1",
        "schema = 2\nthreads = 2",
        "threads = 2\n[params]\nN = 1.5",
        "threads = 2\n[b]\ninputs = ['x']",
        "threads = [",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        LaunchConfig.loads(text)


def test_unknown_io_array_rejected():
    cfg = LaunchConfig(2, params={"N": 2}, inputs=("nope",))
    with pytest.raises(ElaborationError, match="undeclared array"):
        elaborate(parse_kernel(corpus.path("copy.mk").read_text()), cfg)


def test_missing_param():
    with pytest.raises(ElaborationError, match="not bound"):
        elab(corpus.path("copy.mk").read_text())
