"""The text side: spell correction over a frequency vocabulary, a pseudo-step
knowledge base from the mock recipe client, similarity-based step
assignment, level-specific rewriting, and stochastic selection.
"""

from importlib import resources

from lecnce.numerics import make_rng
from lecnce.textaug import (
    assign_pseudo_steps,
    augment_text,
    build_step_kb,
    edit_candidates,
    load_vocabulary,
    mock_clients,
    sample_text,
    spell_correct,
)

vocab = load_vocabulary(resources.files("lecnce") / "assets" / "vocab_sample.tsv")
print(f"sample vocabulary: {len(vocab)} words")

print("\n== spell correction ==")
for word in ("graspr", "disect", "galbladder", "hooook", "zzzzzz"):
    print(f"  {word!r:14s} -> {spell_correct(word, vocab)!r}")
print(f"  one-edit candidates of 'duct': {len(edit_candidates('duct', 1))}; within two edits: {len(edit_candidates('duct', 2))}")

print("\n== pseudo-step knowledge base (mock recipe client) ==")
clients = mock_clients()
kb = build_step_kb(["laparoscopic gallbladder removal"], clients["recipe"])
title, steps = next(iter(kb.items()))
for i, step in enumerate(steps):
    print(f"  {i}. {step}")

print("\n== step assignment by TF-IDF similarity ==")
narrations = [
    "now i dissect around the gallbladder",
    "prepare the field first",
    "closing up after inspection",
]
for narr, idx in zip(narrations, assign_pseudo_steps(narrations, steps)):
    print(f"  {narr!r} -> step {idx}: {steps[idx]!r}")

print("\n== level routing ==")
print("  narration:", augment_text("graspr the duct", "narration", kb=kb, vocab=vocab, title=title))
print("  keystep:  ", augment_text("clipping cutting", "keystep", clients=clients))
print("  abstract: ", augment_text(
    "this lecture demonstrates a complete laparoscopic cholecystectomy with commentary", "abstract", clients=clients))

print("\n== original-vs-augmented sampling ==")
rng = make_rng(0)
picks = [sample_text("original", "augmented", 0.5, rng) for _ in range(10)]
print("  10 draws at p=0.5:", picks)
