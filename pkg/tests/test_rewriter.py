"""Import scanning, deferral planning, patch application, and verification."""

import pytest

from corpus_runner import FIXTURES, check_fixture
from pgo.rewriter import (
    SKIP_DENYLIST,
    SKIP_DYNAMIC,
    SKIP_INLINE,
    ParseError,
    StaleSource,
    VerificationFailure,
    apply,
    patch_summary,
    plan,
    scan_imports,
    verify,
)


class TestScanImports:
    def test_plain_import(self):
        found = scan_imports("import nltk\n")
        assert len(found) == 1
        assert found[0].statement_kind == "plain_import"
        assert found[0].target_module == "nltk"
        assert found[0].bound_names == (("nltk", "nltk"),)

    def test_from_import_binding(self):
        found = scan_imports("from igraph.drawing.colors import Palette\n")
        assert found[0].statement_kind == "from_import"
        assert found[0].target_module == "igraph.drawing.colors"
        assert found[0].bound_names == (("Palette", "igraph.drawing.colors.Palette"),)

    def test_function_scope_import_excluded(self):
        assert scan_imports("def f():\n    import os\n") == []

    def test_guarded_imports_excluded(self):
        source = "try:\n    import a\nexcept ImportError:\n    a = None\nif True:\n    import b\n"
        assert scan_imports(source) == []

    def test_dotted_alias(self):
        found = scan_imports("import a.b.c as x\n")
        assert found[0].bound_names == (("x", "a.b.c"),)

    def test_star_flagged(self):
        found = scan_imports("from pkg import *\n")
        assert found[0].is_star
        assert found[0].bound_names == ()

    def test_multi_alias_one_statement(self):
        found = scan_imports("import a, b\n")
        assert [f.target_module for f in found] == ["a", "b"]
        assert found[0].line_span == found[1].line_span

    def test_syntax_error(self):
        with pytest.raises(ParseError) as err:
            scan_imports("def broken(:\n")
        assert err.value.line == 1


class TestPlan:
    def test_single_scope_one_removal_one_insertion(self):
        source = "import heavy\n\ndef handler():\n    return heavy.go()\n"
        p = plan(source, {"heavy"})
        assert p.removals == ((1, 1),)
        assert len(p.insertions) == 1
        assert p.insertions[0].scope == "handler"
        assert p.insertions[0].statement_text == "import heavy"

    def test_two_scopes_two_insertions(self):
        source = ("import heavy\n\ndef a():\n    return heavy.x()\n\n"
                  "def b():\n    return heavy.y()\n")
        p = plan(source, {"heavy"})
        assert len(p.removals) == 1
        assert [i.scope for i in p.insertions] == ["a", "b"]

    def test_unused_binding_pure_removal(self):
        p = plan("import heavy\n\ndef f():\n    return 1\n", {"heavy"})
        assert p.removals and not p.insertions

    def test_unflagged_untouched(self):
        p = plan("import light\n\ndef f():\n    return light.x\n", {"heavy"})
        assert p.is_empty and not p.skipped

    def test_denylist_skip(self):
        p = plan("import heavy\n\ndef f():\n    return heavy.x\n", {"heavy"},
                 denylist=("heavy",))
        assert p.is_empty
        assert p.skipped[0].reason == SKIP_DENYLIST

    def test_dynamic_import_reported(self):
        source = ("import importlib\n\ndef f(name):\n"
                  "    return importlib.import_module('heavy')\n")
        p = plan(source, {"heavy"})
        assert any(s.reason == SKIP_DYNAMIC for s in p.skipped)

    def test_inline_def_skipped(self):
        source = "import heavy\n\ndef f(): return heavy.x()\n"
        p = plan(source, {"heavy"})
        assert p.is_empty
        assert p.skipped[0].reason == SKIP_INLINE

    def test_lambda_at_module_level_blocks(self):
        source = "import heavy\n\nf = lambda: heavy.x()\n"
        p = plan(source, {"heavy"})
        assert p.is_empty
        assert p.skipped[0].reason == "module-level-use"

    def test_module_level_rebinding_blocks(self):
        source = "import heavy\nif True:\n    heavy = None\n\ndef f():\n    return heavy\n"
        p = plan(source, {"heavy"})
        assert p.is_empty
        assert p.skipped[0].reason == "module-level-use"

    def test_local_shadow_gets_no_insertion(self):
        source = ("import heavy\n\ndef shadowed():\n    heavy = 1\n    return heavy\n\n"
                  "def user():\n    return heavy.x\n")
        p = plan(source, {"heavy"})
        assert [i.scope for i in p.insertions] == ["user"]

    def test_parameter_shadow_gets_no_insertion(self):
        source = "import heavy\n\ndef f(heavy):\n    return heavy\n"
        p = plan(source, {"heavy"})
        assert p.removals and not p.insertions

    def test_submodule_precision(self):
        source = ("import pkg.a\nimport pkg.b\n\ndef fa():\n    return pkg.a.go()\n\n"
                  "def fb():\n    return pkg.b.go()\n")
        p = plan(source, {"pkg.a", "pkg.b"})
        by_scope = {i.scope: i.statement_text for i in p.insertions}
        assert by_scope == {"fa": "import pkg.a", "fb": "import pkg.b"}


class TestApply:
    def test_empty_plan_is_identity(self):
        source = "import light\n\ndef f():\n    return light.x\n"
        p = plan(source, {"heavy"})
        assert apply(source, p) == source

    def test_stale_source(self):
        source = "import heavy\n\ndef f():\n    return heavy.x\n"
        p = plan(source, {"heavy"})
        with pytest.raises(StaleSource):
            apply(source + "# changed\n", p)

    def test_comment_marker_preserves_line(self):
        source = "import heavy\n\ndef f():\n    return heavy.x\n"
        out = apply(source, plan(source, {"heavy"}))
        assert "# [pgo-deferred] import heavy\n" in out
        assert len(out.splitlines()) >= len(source.splitlines())

    def test_patch_summary_lines(self):
        source = "import heavy\n\ndef f():\n    return heavy.x\n"
        p = plan(source, {"heavy"}, filename="m.py")
        summary = patch_summary(source, p)
        assert summary["file"] == "m.py"
        assert summary["removed"] == [1]
        assert summary["inserted"] == [{"scope": "f", "line": 4}]
        out = apply(source, p).splitlines()
        assert out[3].strip() == "import heavy"

    def test_indentation_matches_scope(self):
        source = ("import heavy\n\nclass C:\n    def m(self):\n        return heavy.x\n")
        out = apply(source, plan(source, {"heavy"}))
        assert "\n        import heavy\n" in out


class TestVerify:
    def test_good_rewrite_passes(self):
        source = "import heavy\n\ndef f():\n    return heavy.x\n"
        out = apply(source, plan(source, {"heavy"}))
        report = verify(source, out)
        assert report.ok
        assert report.deferred_bindings == ("heavy",)

    def test_missing_insertion_names_scope(self):
        source = "import heavy\n\ndef f():\n    return heavy.x\n"
        corrupted = source.replace("import heavy\n",
                                   "# [pgo-deferred] import heavy\n", 1)
        report = verify(source, corrupted)
        assert not report.ok
        assert any("f" in v and "heavy" in v for v in report.violations)
        with pytest.raises(VerificationFailure):
            report.raise_for_failure()

    def test_unrelated_file_bindings_diverged(self):
        report = verify("import heavy\nx = 1\n", "y = 2\n")
        assert not report.ok
        assert any("bindings diverged" in v for v in report.violations)

    def test_unparseable_rewrite(self):
        report = verify("x = 1\n", "def broken(:\n")
        assert not report.ok


@pytest.mark.parametrize("fixture", FIXTURES, ids=lambda f: f.name)
def test_corpus(fixture, tmp_path):
    check_fixture(fixture, tmp_path)
