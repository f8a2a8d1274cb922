"""Defers flagged module-level imports into the function scopes that use them.

The transform is line-based patching guided by an AST parse: flagged global
imports are commented out (never deleted) with a ``# [pgo-deferred]`` marker,
and an equivalent import is inserted at the top of every function scope that
references one of the bound names. Everything outside the edited lines is
preserved byte-for-byte, so diffs stay minimal.

Deferral is refused — recorded as a skip, not an error — whenever it could
change behavior: star imports, bindings used at module level (including class
bodies, decorators, default arguments, module-level lambdas and
comprehensions, or ``global`` declarations), imports guarded by ``try`` or a
conditional, modules on the side-effect denylist, and statements mixing
flagged with unflagged modules.
"""

from __future__ import annotations

import ast
import hashlib
from dataclasses import dataclass, field

COMMENT_MARKER = "# [pgo-deferred]"

SKIP_STAR = "star-import"
SKIP_MODULE_LEVEL = "module-level-use"
SKIP_TRY = "try-import"
SKIP_CONDITIONAL = "conditional-import"
SKIP_DENYLIST = "denylisted"
SKIP_MIXED = "mixed-import"
SKIP_INLINE = "inline-scope"
SKIP_DYNAMIC = "dynamic-import"


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


class StaleSource(ValueError):
    """The plan was built from different source text."""


class VerificationFailure(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = tuple(violations)


def source_digest(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


def _parse(source: str, filename: str) -> ast.Module:
    try:
        return ast.parse(source, filename=filename)
    except SyntaxError as exc:
        raise ParseError(str(exc), line=exc.lineno, column=exc.offset) from None


@dataclass(frozen=True)
class GlobalImport:
    source_file: str
    line_span: tuple[int, int]
    statement_kind: str  # "plain_import" | "from_import"
    target_module: str
    bound_names: tuple[tuple[str, str], ...]  # (binding, refers_to)
    is_star: bool = False


def scan_imports(source: str, filename: str = "<source>") -> list[GlobalImport]:
    """Module-level import statements only.

    Imports inside functions, class bodies, conditionals, or try blocks are
    already deferred or deliberately guarded, and are not returned.
    """
    tree = _parse(source, filename)
    found: list[GlobalImport] = []
    for node in tree.body:
        span = (node.lineno, node.end_lineno or node.lineno)
        if isinstance(node, ast.Import):
            for alias in node.names:
                binding = alias.asname or alias.name.split(".")[0]
                refers_to = alias.name if alias.asname else alias.name.split(".")[0]
                found.append(GlobalImport(
                    source_file=filename,
                    line_span=span,
                    statement_kind="plain_import",
                    target_module=alias.name,
                    bound_names=((binding, refers_to),),
                ))
        elif isinstance(node, ast.ImportFrom):
            module = "." * node.level + (node.module or "")
            if any(alias.name == "*" for alias in node.names):
                found.append(GlobalImport(
                    source_file=filename,
                    line_span=span,
                    statement_kind="from_import",
                    target_module=module,
                    bound_names=(),
                    is_star=True,
                ))
                continue
            bound = tuple(
                (alias.asname or alias.name, f"{module}.{alias.name}")
                for alias in node.names
            )
            found.append(GlobalImport(
                source_file=filename,
                line_span=span,
                statement_kind="from_import",
                target_module=module,
                bound_names=bound,
            ))
    return found


@dataclass
class _Scope:
    qualname: str
    node: ast.AST
    params: set[str] = field(default_factory=set)
    stores: set[str] = field(default_factory=set)
    globals_declared: set[str] = field(default_factory=set)
    loads: set[str] = field(default_factory=set)  # bare name loads
    attr_chains: dict[str, set[str]] = field(default_factory=dict)  # root -> dotted chains

    def _shadowed(self, name: str) -> bool:
        # At module level the import statement itself is the binding, not a
        # shadow; only function-local params/assignments hide the global.
        if self.node is None:
            return False
        return name in self.params or name in self.stores

    def references_root(self, name: str) -> bool:
        if self._shadowed(name):
            return False
        return name in self.loads or name in self.attr_chains

    def has_bare_load(self, name: str) -> bool:
        return not self._shadowed(name) and name in self.loads

    def chains_for(self, name: str) -> set[str]:
        if self._shadowed(name):
            return set()
        return self.attr_chains.get(name, set())


class _ScopeCollector(ast.NodeVisitor):
    """Tracks which names each function scope loads, stores, or declares global.

    Code that executes at module import time — module statements, class
    bodies, decorators, default arguments, module-level lambdas and
    comprehensions — is attributed to the module scope. Lambda and
    comprehension bodies inside a function count toward that function, since
    an import inserted at its top is visible to them as a closure.
    """

    def __init__(self) -> None:
        self.module_scope = _Scope(qualname="<module>", node=None)
        self.function_scopes: list[_Scope] = []
        self._stack: list[_Scope] = [self.module_scope]
        self._name_parts: list[str] = []

    @property
    def current(self) -> _Scope:
        return self._stack[-1]

    def visit_Name(self, node: ast.Name) -> None:
        if isinstance(node.ctx, ast.Load):
            self.current.loads.add(node.id)
        else:
            self.current.stores.add(node.id)

    def visit_Attribute(self, node: ast.Attribute) -> None:
        # A pure name-rooted chain like pkg.sub.fn is recorded whole; the root
        # is then not also a bare load, which is what lets the planner insert
        # `import pkg.sub` only into scopes that really touch pkg.sub.
        chain = _attribute_chain(node)
        if chain is not None and isinstance(node.ctx, ast.Load):
            root = chain.split(".", 1)[0]
            self.current.attr_chains.setdefault(root, set()).add(chain)
            return
        self.generic_visit(node)

    def visit_Global(self, node: ast.Global) -> None:
        self.current.globals_declared.update(node.names)

    def _visit_function(self, node: ast.FunctionDef | ast.AsyncFunctionDef) -> None:
        # Decorators, defaults, and annotations evaluate in the enclosing scope.
        for dec in node.decorator_list:
            self.visit(dec)
        for default in [*node.args.defaults, *node.args.kw_defaults]:
            if default is not None:
                self.visit(default)
        for arg in [*node.args.posonlyargs, *node.args.args, *node.args.kwonlyargs,
                    node.args.vararg, node.args.kwarg]:
            if arg is not None and arg.annotation is not None:
                self.visit(arg.annotation)
        if node.returns is not None:
            self.visit(node.returns)

        self.current.stores.add(node.name)
        self._name_parts.append(node.name)
        scope = _Scope(qualname=".".join(self._name_parts), node=node)
        for arg in [*node.args.posonlyargs, *node.args.args, *node.args.kwonlyargs,
                    node.args.vararg, node.args.kwarg]:
            if arg is not None:
                scope.params.add(arg.arg)
        self.function_scopes.append(scope)
        self._stack.append(scope)
        for stmt in node.body:
            self.visit(stmt)
        self._stack.pop()
        self._name_parts.pop()

    visit_FunctionDef = _visit_function
    visit_AsyncFunctionDef = _visit_function

    def visit_ClassDef(self, node: ast.ClassDef) -> None:
        # The class body executes in the enclosing scope at definition time;
        # only its methods get scopes of their own.
        self.current.stores.add(node.name)
        self._name_parts.append(node.name)
        for dec in node.decorator_list:
            self.visit(dec)
        for base in [*node.bases, *node.keywords]:
            self.visit(base)
        for stmt in node.body:
            self.visit(stmt)
        self._name_parts.pop()

    def visit_Import(self, node: ast.Import) -> None:
        for alias in node.names:
            self.current.stores.add(alias.asname or alias.name.split(".")[0])

    def visit_ImportFrom(self, node: ast.ImportFrom) -> None:
        for alias in node.names:
            if alias.name != "*":
                self.current.stores.add(alias.asname or alias.name)


def _attribute_chain(node: ast.Attribute) -> str | None:
    parts = []
    cur: ast.AST = node
    while isinstance(cur, ast.Attribute):
        parts.append(cur.attr)
        cur = cur.value
    if isinstance(cur, ast.Name):
        parts.append(cur.id)
        return ".".join(reversed(parts))
    return None


def _collect_scopes(tree: ast.Module) -> _ScopeCollector:
    collector = _ScopeCollector()
    collector.visit(tree)
    return collector


@dataclass(frozen=True)
class Insertion:
    scope: str  # qualified function name
    anchor_line: int  # original line of the scope's first statement
    indent: str
    statement_text: str


@dataclass(frozen=True)
class Skip:
    reason: str
    detail: str


@dataclass(frozen=True)
class RewritePlan:
    file: str
    source_sha256: str
    removals: tuple[tuple[int, int], ...]
    insertions: tuple[Insertion, ...]
    skipped: tuple[Skip, ...]

    @property
    def is_empty(self) -> bool:
        return not self.removals and not self.insertions


def _matches(dotted: str, unit: str) -> bool:
    return dotted == unit or dotted.startswith(unit + ".")


def _import_is_flagged(imp: GlobalImport, flagged: set[str]) -> bool:
    for unit in flagged:
        if _matches(imp.target_module, unit):
            return True
        for _, refers_to in imp.bound_names:
            if _matches(refers_to, unit):
                return True
    return False


def _guarded_import_skips(tree: ast.Module, flagged: set[str]) -> list[Skip]:
    """Flagged imports under module-level try/if: reported, never rewritten."""
    skips: list[Skip] = []

    def scan_block(stmts, reason: str) -> None:
        for stmt in stmts:
            if isinstance(stmt, (ast.Import, ast.ImportFrom)):
                if isinstance(stmt, ast.Import):
                    targets = [alias.name for alias in stmt.names]
                else:
                    targets = ["." * stmt.level + (stmt.module or "")]
                for target in targets:
                    if any(_matches(target, unit) for unit in flagged):
                        skips.append(Skip(reason, f"{target} at line {stmt.lineno}"))
            elif isinstance(stmt, ast.Try):
                for block in (stmt.body, stmt.orelse, stmt.finalbody,
                              *[h.body for h in stmt.handlers]):
                    scan_block(block, SKIP_TRY)
            elif isinstance(stmt, (ast.If, ast.For, ast.While, ast.With)):
                scan_block(stmt.body, reason)
                scan_block(getattr(stmt, "orelse", []) or [], reason)

    for stmt in tree.body:
        if isinstance(stmt, ast.Try):
            for block in (stmt.body, stmt.orelse, stmt.finalbody,
                          *[h.body for h in stmt.handlers]):
                scan_block(block, SKIP_TRY)
        elif isinstance(stmt, (ast.If, ast.For, ast.While, ast.With)):
            scan_block(stmt.body, SKIP_CONDITIONAL)
            scan_block(getattr(stmt, "orelse", []) or [], SKIP_CONDITIONAL)
    return skips


def _dynamic_import_skips(tree: ast.Module, flagged: set[str]) -> list[Skip]:
    """__import__ / importlib.import_module with a flagged literal: report only."""
    skips: list[Skip] = []
    for node in ast.walk(tree):
        if not isinstance(node, ast.Call):
            continue
        callee = node.func
        is_dynamic = (isinstance(callee, ast.Name) and callee.id == "__import__") or (
            isinstance(callee, ast.Attribute) and callee.attr == "import_module"
        )
        if not is_dynamic or not node.args:
            continue
        arg = node.args[0]
        if isinstance(arg, ast.Constant) and isinstance(arg.value, str):
            if any(_matches(arg.value, unit) for unit in flagged):
                skips.append(Skip(SKIP_DYNAMIC, f"{arg.value} at line {node.lineno}"))
    return skips


def _anchor_for(node: ast.FunctionDef | ast.AsyncFunctionDef, lines: list[str]):
    """(line, indent) of the insertion point, honoring a leading docstring."""
    body = node.body
    first = body[0]
    has_docstring = (
        isinstance(first, ast.Expr)
        and isinstance(first.value, ast.Constant)
        and isinstance(first.value.value, str)
    )
    if has_docstring and len(body) > 1:
        first = body[1]
    elif has_docstring:
        # Docstring-only scope cannot reference anything; caller filters this.
        first = body[0]
    if first.lineno == node.lineno:
        return None  # single-line def: no clean line to insert before
    line_text = lines[first.lineno - 1]
    indent = line_text[: len(line_text) - len(line_text.lstrip())]
    if has_docstring and first is body[0]:
        return (first.end_lineno + 1, indent)
    return (first.lineno, indent)


def plan(source: str, flagged_modules: set[str] | frozenset[str],
         filename: str = "<source>", denylist: tuple[str, ...] = ()) -> RewritePlan:
    """Build the edit list that defers every safely deferrable flagged import."""
    tree = _parse(source, filename)
    lines = source.splitlines()
    imports = scan_imports(source, filename)
    flagged = set(flagged_modules)
    scopes = _collect_scopes(tree)

    skipped: list[Skip] = []
    removals: list[tuple[int, int]] = []
    insertions: list[Insertion] = []

    skipped.extend(_guarded_import_skips(tree, flagged))
    skipped.extend(_dynamic_import_skips(tree, flagged))

    # Group per statement: plain `import a, b` yields one GlobalImport per
    # alias but shares a line span, and the span is edited as a whole.
    by_span: dict[tuple[int, int], list[GlobalImport]] = {}
    for imp in imports:
        by_span.setdefault(imp.line_span, []).append(imp)

    scope_by_name = {s.qualname: s for s in scopes.function_scopes}
    module_globals = {g for s in scopes.function_scopes for g in s.globals_declared}

    # First pass: which statements are candidates for removal.
    dispositions: dict[tuple[int, int], str] = {}
    for span, group in by_span.items():
        flags = [_import_is_flagged(imp, flagged) for imp in group]
        if not any(flags):
            dispositions[span] = "keep"
        elif any(imp.is_star for imp in group):
            dispositions[span] = "star"
        elif not all(flags):
            dispositions[span] = "mixed"
        elif any(_matches(imp.target_module, d) for imp in group for d in denylist):
            dispositions[span] = "denied"
        else:
            dispositions[span] = "candidate"

    # Bindings that stay bound at module level no matter what we remove.
    surviving = {
        name for span, group in by_span.items() if dispositions[span] != "candidate"
        for imp in group for name, _ in imp.bound_names
    }
    # Targets of every plain unaliased import, per root binding; a chain that
    # extends one of these is anchored to that statement, not to its siblings.
    sibling_targets: dict[str, set[str]] = {}
    for group in by_span.values():
        for imp in group:
            if imp.statement_kind != "plain_import" or imp.is_star:
                continue
            binding, _ = imp.bound_names[0]
            if binding == imp.target_module.split(".")[0]:
                sibling_targets.setdefault(binding, set()).add(imp.target_module)

    nonimport_stores = _module_level_nonimport_stores(tree)

    def statement_needed_in(scope: _Scope, group: list[GlobalImport]) -> bool:
        for imp in group:
            for binding, _ in imp.bound_names:
                aliased = (imp.statement_kind == "from_import"
                           or binding != imp.target_module.split(".")[0])
                if aliased:
                    if scope.references_root(binding):
                        return True
                    continue
                target = imp.target_module
                chains = scope.chains_for(binding)
                if any(c == target or c.startswith(target + ".") for c in chains):
                    return True
                siblings = sibling_targets.get(binding, set())
                unanchored = scope.has_bare_load(binding) or any(
                    not any(c == t or c.startswith(t + ".") for t in siblings)
                    for c in chains
                )
                # A bare or unanchored use still works without insertion when
                # an untouched import keeps the root package bound.
                if unanchored and binding not in surviving:
                    return True
        return False

    for span in sorted(by_span):
        group = by_span[span]
        disposition = dispositions[span]
        if disposition == "keep":
            continue
        if disposition == "star":
            skipped.append(Skip(SKIP_STAR, f"{group[0].target_module} at line {span[0]}"))
            continue
        if disposition == "mixed":
            flags = [_import_is_flagged(imp, flagged) for imp in group]
            detail = ", ".join(sorted(i.target_module for i, fl in zip(group, flags) if not fl))
            skipped.append(Skip(SKIP_MIXED, f"line {span[0]} also imports {detail}"))
            continue
        if disposition == "denied":
            denied = [imp.target_module for imp in group
                      if any(_matches(imp.target_module, d) for d in denylist)]
            skipped.append(Skip(SKIP_DENYLIST, f"{denied[0]} at line {span[0]}"))
            continue

        bindings = [name for imp in group for name, _ in imp.bound_names]
        if any(b in module_globals or b in nonimport_stores for b in bindings) or \
                statement_needed_in(scopes.module_scope, group):
            shown = next((b for b in bindings if b in module_globals or b in nonimport_stores),
                         bindings[0])
            skipped.append(Skip(SKIP_MODULE_LEVEL, f"{shown} at line {span[0]}"))
            continue

        using = sorted(
            s.qualname for s in scopes.function_scopes if statement_needed_in(s, group)
        )
        statement_text = _import_text_for_group(group)

        anchors = {}
        inline = None
        for qualname in using:
            anchor = _anchor_for(scope_by_name[qualname].node, lines)
            if anchor is None:
                inline = qualname
                break
            anchors[qualname] = anchor
        if inline is not None:
            skipped.append(Skip(SKIP_INLINE, f"{inline} has no insertable body line"))
            continue

        removals.append(span)
        for qualname in using:
            anchor_line, indent = anchors[qualname]
            insertions.append(Insertion(
                scope=qualname,
                anchor_line=anchor_line,
                indent=indent,
                statement_text=statement_text,
            ))

    removals.sort()
    insertions.sort(key=lambda ins: (ins.anchor_line, ins.scope, ins.statement_text))
    return RewritePlan(
        file=filename,
        source_sha256=source_digest(source),
        removals=tuple(removals),
        insertions=tuple(insertions),
        skipped=tuple(skipped),
    )


def _import_text_for_group(group: list[GlobalImport]) -> str:
    if group[0].statement_kind == "plain_import":
        # An alias exists iff the binding differs from the target's first segment.
        parts = []
        for imp in group:
            binding, _ = imp.bound_names[0]
            if binding != imp.target_module.split(".")[0]:
                parts.append(f"{imp.target_module} as {binding}")
            else:
                parts.append(imp.target_module)
        return "import " + ", ".join(parts)
    imp = group[0]
    parts = []
    for binding, refers_to in imp.bound_names:
        original = refers_to.rsplit(".", 1)[-1]
        parts.append(f"{original} as {binding}" if binding != original else original)
    return f"from {imp.target_module} import " + ", ".join(parts)


def _edit_lines(source: str, plan_: RewritePlan):
    """Yields (rewritten lines, insertion line map keyed by insertion index)."""
    lines = source.splitlines(keepends=True)
    removed_lines = set()
    for start, end in plan_.removals:
        removed_lines.update(range(start, end + 1))
    inserts_at: dict[int, list[int]] = {}
    for idx, ins in enumerate(plan_.insertions):
        inserts_at.setdefault(ins.anchor_line, []).append(idx)

    out: list[str] = []
    final_line_of: dict[int, int] = {}
    for lineno, line in enumerate(lines, start=1):
        for idx in inserts_at.get(lineno, ()):
            ins = plan_.insertions[idx]
            out.append(f"{ins.indent}{ins.statement_text}\n")
            final_line_of[idx] = len(out)
        if lineno in removed_lines:
            out.append(f"{COMMENT_MARKER} {line}" if line.strip() else line)
        else:
            out.append(line)
    return out, final_line_of


def apply(source: str, plan_: RewritePlan) -> str:
    """Apply a plan built from this exact source; output always parses."""
    if source_digest(source) != plan_.source_sha256:
        raise StaleSource(f"{plan_.file}: source changed since the plan was built")
    out, _ = _edit_lines(source, plan_)
    rewritten = "".join(out)
    _parse(rewritten, plan_.file)  # edits must never produce broken source
    return rewritten


def patch_summary(source: str, plan_: RewritePlan) -> dict:
    """JSON-ready summary; insertion line numbers refer to the rewritten file."""
    if source_digest(source) != plan_.source_sha256:
        raise StaleSource(f"{plan_.file}: source changed since the plan was built")
    _, final_line_of = _edit_lines(source, plan_)
    removed = sorted(
        line for start, end in plan_.removals for line in range(start, end + 1)
    )
    return {
        "file": plan_.file,
        "removed": removed,
        "inserted": [
            {"scope": ins.scope, "line": final_line_of[idx]}
            for idx, ins in enumerate(plan_.insertions)
        ],
        "skipped": [{"reason": s.reason, "detail": s.detail} for s in plan_.skipped],
    }


def _deferred_statements(rewritten: str) -> list[str]:
    statements = []
    for line in rewritten.splitlines():
        stripped = line.strip()
        if stripped.startswith(COMMENT_MARKER):
            statements.append(stripped[len(COMMENT_MARKER):].strip())
    return statements


def _bindings_of_import_node(node: ast.AST) -> set[str]:
    names = set()
    if isinstance(node, ast.Import):
        for alias in node.names:
            names.add(alias.asname or alias.name.split(".")[0])
    elif isinstance(node, ast.ImportFrom):
        for alias in node.names:
            if alias.name != "*":
                names.add(alias.asname or alias.name)
    return names


def _bindings_of_import_text(text: str) -> set[str]:
    try:
        node = ast.parse(text).body[0]
    except (SyntaxError, IndexError):
        return set()
    return _bindings_of_import_node(node)


def _module_level_nonimport_stores(tree: ast.Module) -> set[str]:
    """Names rebound at module level by something other than an import.

    Rebinding a deferred name at module level (``heavy = None``) would change
    what the functions see, so such statements block deferral.
    """
    stores: set[str] = set()

    def scan(node: ast.AST) -> None:
        for child in ast.iter_child_nodes(node):
            if isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef,
                                  ast.ClassDef, ast.Lambda)):
                continue
            if isinstance(child, ast.Name) and not isinstance(child.ctx, ast.Load):
                stores.add(child.id)
            scan(child)

    for stmt in tree.body:
        if not isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef,
                                 ast.Import, ast.ImportFrom)):
            scan(stmt)
    return stores


def _module_level_bindings(tree: ast.Module) -> set[str]:
    """Names bound at module level once the module has executed (static view)."""
    bound: set[str] = set()

    def scan(stmts) -> None:
        for stmt in stmts:
            if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
                bound.add(stmt.name)
            elif isinstance(stmt, ast.Import):
                for alias in stmt.names:
                    bound.add(alias.asname or alias.name.split(".")[0])
            elif isinstance(stmt, ast.ImportFrom):
                for alias in stmt.names:
                    if alias.name != "*":
                        bound.add(alias.asname or alias.name)
            elif isinstance(stmt, (ast.If, ast.For, ast.While, ast.With, ast.Try)):
                for attr in ("body", "orelse", "finalbody"):
                    scan(getattr(stmt, attr, []) or [])
                for handler in getattr(stmt, "handlers", []):
                    scan(handler.body)
            else:
                for node in ast.walk(stmt):
                    if isinstance(node, ast.Name) and isinstance(node.ctx, ast.Store):
                        bound.add(node.id)

    scan(tree.body)
    return bound


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    violations: tuple[str, ...]
    deferred_bindings: tuple[str, ...]

    def raise_for_failure(self) -> None:
        if not self.ok:
            raise VerificationFailure(list(self.violations))


def verify(original: str, rewritten: str) -> VerificationReport:
    """Static behavior-preservation checks for a rewrite.

    The deferred bindings are recovered from the marker comments, so the
    check needs no plan: (1) rewritten parses, (2) module-level bindings are
    unchanged apart from the deferred names, which must be gone, (3) every
    function scope that uses a deferred name re-imports it locally.
    """
    violations: list[str] = []
    try:
        original_tree = ast.parse(original)
    except SyntaxError as exc:
        return VerificationReport(False, (f"original does not parse: {exc}",), ())
    try:
        rewritten_tree = ast.parse(rewritten)
    except SyntaxError as exc:
        return VerificationReport(False, (f"rewritten does not parse: {exc}",), ())

    deferred: set[str] = set()
    for statement in _deferred_statements(rewritten):
        deferred |= _bindings_of_import_text(statement)
    # A surviving import may legitimately re-bind the same root package
    # (e.g. `import pkg.core` kept while `import pkg.sem` was deferred).
    surviving_imports: set[str] = set()
    for node in rewritten_tree.body:
        if isinstance(node, (ast.Import, ast.ImportFrom)):
            surviving_imports |= _bindings_of_import_node(node)
    deferred -= surviving_imports

    original_bindings = _module_level_bindings(original_tree)
    rewritten_bindings = _module_level_bindings(rewritten_tree)
    expected = original_bindings - deferred
    if rewritten_bindings - original_bindings:
        extra = ", ".join(sorted(rewritten_bindings - original_bindings))
        violations.append(f"bindings diverged: unexpected module-level names {extra}")
    if expected - rewritten_bindings:
        missing = ", ".join(sorted(expected - rewritten_bindings))
        violations.append(f"bindings diverged: missing module-level names {missing}")
    still_global = deferred & rewritten_bindings
    if still_global:
        violations.append(
            "deferred names still bound at module level: " + ", ".join(sorted(still_global))
        )

    scopes = _collect_scopes(rewritten_tree)
    for scope in scopes.function_scopes:
        needed = {name for name in deferred if scope.references_root(name)}
        if not needed:
            continue
        local_imports: set[str] = set()
        for node in ast.walk(scope.node):
            if isinstance(node, ast.Import):
                local_imports |= {a.asname or a.name.split(".")[0] for a in node.names}
            elif isinstance(node, ast.ImportFrom):
                local_imports |= {a.asname or a.name for a in node.names if a.name != "*"}
        missing = needed - local_imports
        if missing:
            violations.append(
                f"scope {scope.qualname} uses deferred name(s) "
                f"{', '.join(sorted(missing))} without a local import"
            )

    return VerificationReport(
        ok=not violations,
        violations=tuple(violations),
        deferred_bindings=tuple(sorted(deferred)),
    )
