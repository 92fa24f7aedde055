"""Bitcoin transactions extended with covenant scripts: model, parser, evaluator, ledger, contracts."""

from .crypto import Keyring, ver_multisig
from .errors import ContextError, ScriptSyntaxError, ScriptTypeError, UnresolvedNameError
from .interp import BOT, EvalContext, evaluate, format_result
from .ledger import Ledger, RejectReason, Rejection, TxRejected, load_chain, replay, save_chain, validate_chain
from .model import Output, OutputRef, Transaction, script_eq, tx_id
from .parser import parse_script, render_script
from .scenario import Report, Scenario, run_scenario

__all__ = [
    "BOT", "ContextError", "EvalContext", "Keyring", "Ledger", "Output", "OutputRef", "RejectReason",
    "Rejection", "Report", "Scenario", "ScriptSyntaxError", "ScriptTypeError", "Transaction",
    "TxRejected", "UnresolvedNameError", "evaluate", "format_result", "load_chain", "parse_script",
    "render_script", "replay", "run_scenario", "save_chain", "script_eq", "tx_id", "validate_chain",
    "ver_multisig",
]
