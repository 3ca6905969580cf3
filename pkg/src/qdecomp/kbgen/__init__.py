"""Knowledge-base backed generation of complex questions with known split points."""
from qdecomp.kbgen.generate import (
    COMP_TYPES,
    DEFAULT_QUOTA,
    PredicateTemplate,
    Record,
    SeedExample,
    allocate,
    candidate_pools,
    comparative_candidates,
    composition_candidates,
    conj_candidates,
    find_template,
    gap_midpoints,
    gen_comparative,
    gen_composition,
    gen_conj,
    gen_superlative,
    generate_dataset,
    leaks_answer,
    load_seeds,
    load_synonyms,
    load_templates,
    make_mg_question,
    noise_record,
    read_records,
    sample_records,
    split_consistent,
    substitute_synonyms,
    superlative_candidates,
    swap_segments,
    synthetic_pairs,
    write_records,
)
from qdecomp.kbgen.kb import KnowledgeBase, Literal, Triple, load_kb
from qdecomp.kbgen.query import ConjunctiveQuery, Filter, Order, Pattern, execute, execute_values

__all__ = [name for name in dir() if not name.startswith("_")]
