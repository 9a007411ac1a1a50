from __future__ import annotations

from collections.abc import Mapping, Sequence

from undo_stack import Signal, SignalContainer, UndoCommand, UndoStack

from rig_tuner.utils.errors import RigContractError

from .expression_pair import ExpressionPair


class ActivationEdit(UndoCommand):
    """Swaps one pair between its state before and after an activation edit."""

    def __init__(
        self,
        editor: ExpressionSetEditor,
        before: ExpressionPair,
        after: ExpressionPair,
        control: str,
    ):
        super().__init__()
        self._editor = editor
        self._before = before
        self._after = after
        self._control = control

    @property
    def pair_name(self) -> str:
        return self._after.name

    @property
    def description(self) -> str:
        value = self._editor.control_value(self._after, self._control)
        return f"Set {self._control} of '{self.pair_name}' to {value}"

    def undo(self) -> None:
        self._editor._set_pair(self._before)

    def redo(self) -> None:
        self._editor._set_pair(self._after)


class ExpressionSetEditor(SignalContainer):
    """
    Manual per-pair activation edits, for instance lowering a jaw_open value
    the actor overshot. Edits go through an UndoStack when one is set.
    """

    pair_modified = Signal(str)

    def __init__(
        self,
        pairs: Sequence[ExpressionPair],
        control_names: Sequence[str],
        undo_stack: UndoStack | None = None,
    ):
        self._pairs = {pair.name: pair for pair in pairs}
        self._order = [pair.name for pair in pairs]
        self._control_index = {name: i for i, name in enumerate(control_names)}
        self._undo_stack = undo_stack

    def set_undo_stack(self, undo_stack: UndoStack | None):
        self._undo_stack = undo_stack

    @property
    def undo_stack(self) -> UndoStack | None:
        return self._undo_stack

    @property
    def pairs(self) -> list[ExpressionPair]:
        return [self._pairs[name] for name in self._order]

    def get_pair(self, name: str) -> ExpressionPair:
        if name not in self._pairs:
            _error_msg = f"Unknown expression '{name}'"
            raise RigContractError(_error_msg)
        return self._pairs[name]

    def get_activation(self, pair_name: str, control: str) -> float:
        return self.control_value(self.get_pair(pair_name), control)

    def control_value(self, pair: ExpressionPair, control: str) -> float:
        return float(pair.c[self._index(control)])

    def set_activation(self, pair_name: str, control: str, value: float) -> None:
        prev_pair = self.get_pair(pair_name)
        index = self._index(control)
        if prev_pair.c[index] == value:
            return

        c = prev_pair.c.copy()
        c[index] = value
        next_pair = prev_pair.replace(c=c)
        self._set_pair(next_pair)

        if self._undo_stack is not None:
            self._undo_stack.push(ActivationEdit(self, prev_pair, next_pair, control))

    def apply_overrides(self, overrides: Mapping[str, Mapping[str, float]]) -> None:
        for pair_name, activations in overrides.items():
            for control, value in activations.items():
                self.set_activation(pair_name, control, float(value))

    def _index(self, control: str) -> int:
        if control not in self._control_index:
            _error_msg = f"Unknown control '{control}'"
            raise RigContractError(_error_msg)
        return self._control_index[control]

    def _set_pair(self, pair: ExpressionPair) -> None:
        if self._pairs[pair.name] is pair:
            return
        self._pairs[pair.name] = pair
        self.pair_modified(pair.name)
