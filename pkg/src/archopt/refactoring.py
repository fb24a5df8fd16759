"""Refactoring action catalog: feasibility, application, and distance.

All actions preserve functional behavior: the operations a scenario
invokes and its total expected demand stay the same, only placement and
replication change.  ``apply`` never mutates its input; it returns a new
architecture.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Iterable, Mapping, Union

import numpy as np

from .model import (
    Architecture,
    CallStep,
    Component,
    NetworkLink,
    Operation,
    ProcessorNode,
    RoutingError,
    UsageScenario,
    invocation_matrix,
    validate,
)

NEW_NODE_PREFIX = "new-node:"


class ActionKind(str, Enum):
    CLONE = "clone"
    MOVE_TO_NEW = "move_to_new"
    MOVE_TO_COMPONENT = "move_to_component"
    REDEPLOY = "redeploy"


class InfeasibleActionError(ValueError):
    """An action cannot be applied to the given architecture."""

    def __init__(self, reason: str, index: int | None = None):
        self.reason = reason
        self.index = index
        message = reason if index is None else f"action {index}: {reason}"
        super().__init__(message)


class NoFeasibleActionError(RuntimeError):
    """Random sampling found no feasible action of any kind."""


@dataclass(frozen=True)
class CloneComponent:
    """Add a load-sharing replica of a component on a target node."""

    component: str
    target: str  # node id, or "new-node:<template node id>"
    kind: ClassVar[ActionKind] = ActionKind.CLONE


@dataclass(frozen=True)
class MoveOperationToNewComponent:
    """Extract an operation into a fresh component on a target node."""

    operation: str
    target_node: str
    kind: ClassVar[ActionKind] = ActionKind.MOVE_TO_NEW


@dataclass(frozen=True)
class MoveOperationToComponent:
    """Transfer an operation to an existing component."""

    operation: str
    target_component: str
    kind: ClassVar[ActionKind] = ActionKind.MOVE_TO_COMPONENT


@dataclass(frozen=True)
class RedeployComponent:
    """Move a component to a different processor node."""

    component: str
    target: str  # node id, or "new-node:<template node id>"
    kind: ClassVar[ActionKind] = ActionKind.REDEPLOY


RefactoringAction = Union[CloneComponent, MoveOperationToNewComponent, MoveOperationToComponent, RedeployComponent]


@dataclass(frozen=True)
class RefactoringSequence:
    actions: tuple[RefactoringAction, ...]

    def __len__(self) -> int:
        return len(self.actions)


DEFAULT_BRF: dict[ActionKind, float] = {
    ActionKind.CLONE: 1.23,
    ActionKind.MOVE_TO_NEW: 1.80,
    ActionKind.MOVE_TO_COMPONENT: 1.64,
    ActionKind.REDEPLOY: 1.45,
}


# ---------------------------------------------------------------------------
# Fresh ids
# ---------------------------------------------------------------------------


def _fresh_suffix(taken: set[str], bases: Iterable[str]) -> int:
    """Smallest k >= 1 such that every f"{base}{k}" is unused."""
    k = 1
    bases = list(bases)
    while any(f"{base}{k}" in taken for base in bases):
        k += 1
    return k


def _all_ids(arch: Architecture) -> set[str]:
    ids = {c.id for c in arch.components}
    ids.update(op.id for c in arch.components for op in c.operations)
    ids.update(n.id for n in arch.nodes)
    ids.update(l.id for l in arch.links)
    ids.update(s.id for s in arch.scenarios)
    return ids


def _instantiate_node(arch: Architecture, template_id: str) -> tuple[Architecture, str]:
    """Copy a template node under a fresh id, wired like a peer: links to
    all of the template's neighbors plus one to the template itself."""
    template = arch.node(template_id)
    taken = _all_ids(arch)
    suffix = _fresh_suffix(
        taken, [f"{template_id}_copy", f"{template_id}_uplink"] + [f"{l.id}_copy" for l in arch.links]
    )
    new_id = f"{template_id}_copy{suffix}"
    new_node = ProcessorNode(id=new_id, speed_factor=template.speed_factor, cores=template.cores)
    new_links = list(arch.links)
    template_links = [l for l in arch.links if template_id in l.endpoints]
    for link in template_links:
        other = link.endpoints[0] if link.endpoints[1] == template_id else link.endpoints[1]
        new_links.append(
            NetworkLink(
                id=f"{link.id}_copy{suffix}",
                endpoints=(other, new_id),
                failure_probability=link.failure_probability,
                delay=link.delay,
            )
        )
    # same-segment assumption: the copy reaches its template at least as
    # well as the template's best existing link
    new_links.append(
        NetworkLink(
            id=f"{template_id}_uplink{suffix}",
            endpoints=(template_id, new_id),
            failure_probability=min((l.failure_probability for l in template_links), default=0.0),
            delay=min((l.delay for l in template_links), default=0.0),
        )
    )
    return (
        Architecture(
            components=arch.components,
            nodes=arch.nodes + (new_node,),
            links=tuple(new_links),
            scenarios=arch.scenarios,
            deployment=dict(arch.deployment),
        ),
        new_id,
    )


def _resolve_target_node(arch: Architecture, target: str) -> tuple[Architecture, str] | str:
    """Return (arch-with-node, node-id) or an infeasibility reason."""
    if target.startswith(NEW_NODE_PREFIX):
        template_id = target[len(NEW_NODE_PREFIX):]
        if not any(n.id == template_id for n in arch.nodes):
            return f"template node '{template_id}' does not exist"
        return _instantiate_node(arch, template_id)
    if not any(n.id == target for n in arch.nodes):
        return f"target node '{target}' does not exist"
    return arch, target


# ---------------------------------------------------------------------------
# Application
# ---------------------------------------------------------------------------


def _drop_component(components: tuple[Component, ...], deployment: dict[str, str], comp_id: str):
    remaining = tuple(c for c in components if c.id != comp_id)
    new_deployment = {k: v for k, v in deployment.items() if k != comp_id}
    return remaining, new_deployment


def _apply_clone(arch: Architecture, action: CloneComponent):
    try:
        source = arch.component(action.component)
    except KeyError:
        return None, f"component '{action.component}' does not exist"
    resolved = _resolve_target_node(arch, action.target)
    if isinstance(resolved, str):
        return None, resolved
    arch, target_node = resolved

    taken = _all_ids(arch)
    suffix = _fresh_suffix(taken, [f"{source.id}_clone"] + [f"{op.id}_clone" for op in source.operations])
    replica_id = f"{source.id}_clone{suffix}"
    op_twin = {op.id: f"{op.id}_clone{suffix}" for op in source.operations}
    replica = Component(
        id=replica_id,
        operations=tuple(Operation(id=op_twin[op.id], cpu_demand=op.cpu_demand) for op in source.operations),
        failure_probability=source.failure_probability,
    )

    scenarios = []
    for scen in arch.scenarios:
        steps: list[CallStep] = []
        for step in scen.steps:
            if step.operation in op_twin:
                half = step.count / 2.0
                steps.append(CallStep(operation=step.operation, count=half))
                steps.append(CallStep(operation=op_twin[step.operation], count=half))
            else:
                steps.append(step)
        scenarios.append(
            UsageScenario(
                id=scen.id,
                mix_weight=scen.mix_weight,
                population=scen.population,
                think_time=scen.think_time,
                steps=tuple(steps),
            )
        )

    deployment = dict(arch.deployment)
    deployment[replica_id] = target_node
    return (
        Architecture(
            components=arch.components + (replica,),
            nodes=arch.nodes,
            links=arch.links,
            scenarios=tuple(scenarios),
            deployment=deployment,
        ),
        "",
    )


def _apply_move_to_component(arch: Architecture, action: MoveOperationToComponent):
    owners = arch.owner_map()
    if action.operation not in owners:
        return None, f"operation '{action.operation}' does not exist"
    source = owners[action.operation]
    if not any(c.id == action.target_component for c in arch.components):
        return None, f"target component '{action.target_component}' does not exist"
    if source.id == action.target_component:
        return None, f"operation '{action.operation}' is already owned by '{source.id}'"

    moved = next(op for op in source.operations if op.id == action.operation)
    components = []
    for comp in arch.components:
        if comp.id == source.id:
            remaining_ops = tuple(op for op in comp.operations if op.id != action.operation)
            if remaining_ops:
                components.append(Component(comp.id, remaining_ops, comp.failure_probability))
            # emptied source component is deleted
        elif comp.id == action.target_component:
            components.append(Component(comp.id, comp.operations + (moved,), comp.failure_probability))
        else:
            components.append(comp)

    deployment = dict(arch.deployment)
    if len(source.operations) == 1:
        deployment.pop(source.id, None)
    return (
        Architecture(tuple(components), arch.nodes, arch.links, arch.scenarios, deployment),
        "",
    )


def _apply_move_to_new(arch: Architecture, action: MoveOperationToNewComponent):
    owners = arch.owner_map()
    if action.operation not in owners:
        return None, f"operation '{action.operation}' does not exist"
    if not any(n.id == action.target_node for n in arch.nodes):
        return None, f"target node '{action.target_node}' does not exist"
    source = owners[action.operation]

    taken = _all_ids(arch)
    suffix = _fresh_suffix(taken, [f"{action.operation}_host"])
    host_id = f"{action.operation}_host{suffix}"
    moved = next(op for op in source.operations if op.id == action.operation)
    host = Component(id=host_id, operations=(moved,), failure_probability=source.failure_probability)

    components = []
    for comp in arch.components:
        if comp.id == source.id:
            remaining_ops = tuple(op for op in comp.operations if op.id != action.operation)
            if remaining_ops:
                components.append(Component(comp.id, remaining_ops, comp.failure_probability))
        else:
            components.append(comp)
    components.append(host)

    deployment = dict(arch.deployment)
    if len(source.operations) == 1:
        deployment.pop(source.id, None)
    deployment[host_id] = action.target_node
    return (
        Architecture(tuple(components), arch.nodes, arch.links, arch.scenarios, deployment),
        "",
    )


def _apply_redeploy(arch: Architecture, action: RedeployComponent):
    if not any(c.id == action.component for c in arch.components):
        return None, f"component '{action.component}' does not exist"
    current = arch.deployment[action.component]
    if not action.target.startswith(NEW_NODE_PREFIX) and action.target == current:
        return None, f"target equals current node '{current}'"
    resolved = _resolve_target_node(arch, action.target)
    if isinstance(resolved, str):
        return None, resolved
    arch, target_node = resolved
    deployment = dict(arch.deployment)
    deployment[action.component] = target_node
    return (
        Architecture(arch.components, arch.nodes, arch.links, arch.scenarios, deployment),
        "",
    )


_APPLIERS = {
    ActionKind.CLONE: _apply_clone,
    ActionKind.MOVE_TO_COMPONENT: _apply_move_to_component,
    ActionKind.MOVE_TO_NEW: _apply_move_to_new,
    ActionKind.REDEPLOY: _apply_redeploy,
}


def _try_apply(arch: Architecture, action: RefactoringAction) -> tuple[Architecture | None, str]:
    """Apply if feasible; return (result, "") or (None, reason)."""
    result, reason = _APPLIERS[action.kind](arch, action)
    if result is None:
        return None, reason
    violations = validate(result)
    if violations:
        return None, f"result would be invalid: {violations[0]}"
    try:
        invocation_matrix(result)
    except RoutingError as exc:
        return None, f"result would be unroutable: {exc}"
    return result, ""


def is_feasible(arch: Architecture, action: RefactoringAction) -> tuple[bool, str]:
    """Whether the action can be applied, with the blocking reason if not."""
    result, reason = _try_apply(arch, action)
    return (result is not None), reason


def apply(arch: Architecture, action: RefactoringAction) -> Architecture:
    """Apply a single feasible action, returning a new architecture."""
    result, reason = _try_apply(arch, action)
    if result is None:
        raise InfeasibleActionError(reason)
    return result


def apply_sequence(arch: Architecture, seq: RefactoringSequence) -> Architecture:
    """Left fold of ``apply``; reports the index of the first infeasible action."""
    current = arch
    for index, action in enumerate(seq.actions):
        result, reason = _try_apply(current, action)
        if result is None:
            raise InfeasibleActionError(reason, index=index)
        current = result
    return current


def distance(seq: RefactoringSequence, brf: Mapping[ActionKind, float] | None = None) -> float:
    """Architectural distance: sum of per-action baseline refactoring factors."""
    table = DEFAULT_BRF if brf is None else brf
    return math.fsum(table[action.kind] for action in seq.actions)


# ---------------------------------------------------------------------------
# Random sampling and repair
# ---------------------------------------------------------------------------


def _pick(rng: np.random.Generator, items: list):
    return items[int(rng.integers(len(items)))]


def _sample_action(arch: Architecture, kind: ActionKind, rng: np.random.Generator, allow_new_nodes: bool):
    node_ids = [n.id for n in arch.nodes]
    new_node_targets = [NEW_NODE_PREFIX + n for n in node_ids] if allow_new_nodes else []
    if kind == ActionKind.CLONE:
        comp = _pick(rng, list(arch.components))
        target = _pick(rng, node_ids + new_node_targets)
        return CloneComponent(comp.id, target)
    if kind == ActionKind.MOVE_TO_COMPONENT:
        owners = arch.owner_map()
        op_id = _pick(rng, list(owners))
        others = [c.id for c in arch.components if c.id != owners[op_id].id]
        if not others:
            return None
        return MoveOperationToComponent(op_id, _pick(rng, others))
    if kind == ActionKind.MOVE_TO_NEW:
        owners = arch.owner_map()
        op_id = _pick(rng, list(owners))
        return MoveOperationToNewComponent(op_id, _pick(rng, node_ids))
    comp = _pick(rng, list(arch.components))
    current = arch.deployment[comp.id]
    targets = [n for n in node_ids if n != current] + new_node_targets
    if not targets:
        return None
    return RedeployComponent(comp.id, _pick(rng, targets))


def random_action(
    arch: Architecture,
    rng: np.random.Generator,
    allow_new_nodes: bool = True,
    max_tries: int = 50,
) -> RefactoringAction:
    """Sample a feasible action: kind uniformly, then parameters by
    reject-and-resample; falls back to the remaining kinds on exhaustion."""
    remaining = list(ActionKind)
    while remaining:
        kind = _pick(rng, remaining)
        for _ in range(max_tries):
            action = _sample_action(arch, kind, rng, allow_new_nodes)
            if action is None:
                break
            ok, _ = is_feasible(arch, action)
            if ok:
                return action
        remaining.remove(kind)
    raise NoFeasibleActionError("no feasible action exists for this architecture")


def _rebuild(
    arch: Architecture,
    actions: tuple[RefactoringAction, ...],
    rng: np.random.Generator,
    allow_new_nodes: bool,
    resample_probability: float = 0.0,
) -> tuple[RefactoringSequence, Architecture]:
    """Walk the genes in prefix order, resampling forced or infeasible ones."""
    current = arch
    repaired: list[RefactoringAction] = []
    for action in actions:
        force = resample_probability > 0.0 and rng.random() < resample_probability
        if not force:
            result, _ = _try_apply(current, action)
            if result is not None:
                repaired.append(action)
                current = result
                continue
        action = random_action(current, rng, allow_new_nodes=allow_new_nodes)
        current = apply(current, action)
        repaired.append(action)
    return RefactoringSequence(tuple(repaired)), current


def repair(
    arch: Architecture,
    seq: RefactoringSequence,
    rng: np.random.Generator,
    allow_new_nodes: bool = True,
) -> RefactoringSequence:
    """Rewrite each infeasible gene, in prefix order, with a random feasible one."""
    repaired, _ = _rebuild(arch, seq.actions, rng, allow_new_nodes)
    return repaired


def random_sequence(
    arch: Architecture,
    length: int,
    rng: np.random.Generator,
    allow_new_nodes: bool = True,
) -> RefactoringSequence:
    """Sample a feasible sequence by chaining random actions."""
    current = arch
    actions = []
    for _ in range(length):
        action = random_action(current, rng, allow_new_nodes=allow_new_nodes)
        current = apply(current, action)
        actions.append(action)
    return RefactoringSequence(tuple(actions))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def action_to_dict(action: RefactoringAction) -> dict:
    if isinstance(action, CloneComponent):
        return {"kind": action.kind.value, "component": action.component, "target": action.target}
    if isinstance(action, MoveOperationToNewComponent):
        return {"kind": action.kind.value, "operation": action.operation, "target": action.target_node}
    if isinstance(action, MoveOperationToComponent):
        return {"kind": action.kind.value, "operation": action.operation, "component": action.target_component}
    return {"kind": action.kind.value, "component": action.component, "target": action.target}


def action_from_dict(record: dict) -> RefactoringAction:
    kind = ActionKind(record["kind"])
    if kind == ActionKind.CLONE:
        return CloneComponent(record["component"], record["target"])
    if kind == ActionKind.MOVE_TO_NEW:
        return MoveOperationToNewComponent(record["operation"], record["target"])
    if kind == ActionKind.MOVE_TO_COMPONENT:
        return MoveOperationToComponent(record["operation"], record["component"])
    return RedeployComponent(record["component"], record["target"])


def sequence_to_records(seq: RefactoringSequence) -> list[dict]:
    return [action_to_dict(a) for a in seq.actions]


def sequence_from_records(records: list[dict]) -> RefactoringSequence:
    return RefactoringSequence(tuple(action_from_dict(r) for r in records))


_ACTION_TEXT = re.compile(r"(\w+)\((.+?)->(.+)\)")


def action_to_text(action: RefactoringAction) -> str:
    if isinstance(action, CloneComponent):
        return f"{action.kind.value}({action.component}->{action.target})"
    if isinstance(action, MoveOperationToNewComponent):
        return f"{action.kind.value}({action.operation}->{action.target_node})"
    if isinstance(action, MoveOperationToComponent):
        return f"{action.kind.value}({action.operation}->{action.target_component})"
    return f"{action.kind.value}({action.component}->{action.target})"


def action_from_text(text: str) -> RefactoringAction:
    match = _ACTION_TEXT.fullmatch(text.strip())
    if match is None:
        raise ValueError(f"unparseable action text: {text!r}")
    kind = ActionKind(match.group(1))
    source, target = match.group(2), match.group(3)
    if kind == ActionKind.CLONE:
        return CloneComponent(source, target)
    if kind == ActionKind.MOVE_TO_NEW:
        return MoveOperationToNewComponent(source, target)
    if kind == ActionKind.MOVE_TO_COMPONENT:
        return MoveOperationToComponent(source, target)
    return RedeployComponent(source, target)


def sequence_to_text(seq: RefactoringSequence) -> str:
    return "; ".join(action_to_text(a) for a in seq.actions)


def sequence_from_text(text: str) -> RefactoringSequence:
    text = text.strip()
    if not text:
        return RefactoringSequence(())
    return RefactoringSequence(tuple(action_from_text(part) for part in text.split("; ")))
