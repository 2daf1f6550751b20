"""Three-section scenario DSL: model, parser, canonical printer, validation."""

from .dictionary import ADVERSARIAL_VERBS, DEFAULT_DICTIONARY, EGO_VERBS, SemanticDictionary
from .model import (
    RELATIONS,
    ROLES,
    AbsolutePlacement,
    Action,
    DslDocument,
    RelativePlacement,
    Schedule,
    Symbol,
    Value,
    VehicleDecl,
    field_paths,
    set_field,
)
from .parser import parse_dsl, parse_section
from .printer import format_action, format_value, print_dsl, print_section
from .validate import (
    DictionaryReport,
    Finding,
    StructureReport,
    check_dictionary,
    validate_structure,
)

__all__ = [
    "ADVERSARIAL_VERBS",
    "DEFAULT_DICTIONARY",
    "EGO_VERBS",
    "SemanticDictionary",
    "RELATIONS",
    "ROLES",
    "AbsolutePlacement",
    "Action",
    "DslDocument",
    "RelativePlacement",
    "Schedule",
    "Symbol",
    "Value",
    "VehicleDecl",
    "field_paths",
    "set_field",
    "parse_dsl",
    "parse_section",
    "format_action",
    "format_value",
    "print_dsl",
    "print_section",
    "DictionaryReport",
    "Finding",
    "StructureReport",
    "check_dictionary",
    "validate_structure",
]
