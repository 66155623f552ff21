"""Shipped prompt catalogs.

A locked deployment would normally mint its own key prompt; these lists
exist for sweeps, collision tests, and as the attacker guessing pool.
"""

from __future__ import annotations

PAINTING_STYLES = (
    "Watercolor painting effect",
    "Impasto brush strokes",
    "Acrylic vibrant colors",
    "Charcoal sketch texture",
    "Pastel tones overlay",
)

ARTIST_STYLES = (
    "With Van Gogh's painting style",
    "In Monet's impressionist style",
    "Rembrandt lighting technique",
    "Picasso's cubist interpretation",
    "Dali's surrealism touch",
)

ART_FORMS = (
    "With cyberpunk style",
    "Art deco geometric patterns",
    "Pop art comic book flair",
    "Minimalist Scandinavian design",
    "Japanese ukiyo-e woodblock print",
)

PHOTO_ADJUSTMENTS = (
    "Boost color saturation",
    "Sharpen image detail",
    "Balance contrast levels",
    "Adjust white balance for warmth",
    "Enhance shadows and highlights",
)

IRRELEVANT_OBJECTS = (
    "abacus", "accordion", "aircraft carrier", "analog clock", "apiary",
    "barometer", "baseball", "basketball", "bathtub", "beer bottle",
    "bow tie", "bullet train", "cello", "chain saw", "church",
    "corkscrew", "digital clock", "electric fan", "fire engine", "flute",
    "gas pump", "grocery store", "hair slide", "mailbox", "parachute",
)

RELEVANT_OBJECTS = (
    "great white shark", "bald eagle", "African elephant", "chimpanzee",
    "gorilla", "koala", "lion", "tiger", "cheetah", "hippopotamus",
    "giraffe", "zebra", "African grey", "peacock", "flamingo",
    "jellyfish", "sea urchin", "starfish", "kangaroo", "orangutan",
    "giant panda", "rhinoceros", "seahorse", "octopus", "coral reef",
)


def object_prompt(name: str) -> str:
    return f"with {name} in the background"


def style_prompt_pool() -> tuple[str, ...]:
    """All 20 style prompts."""
    return PAINTING_STYLES + ARTIST_STYLES + ART_FORMS + PHOTO_ADJUSTMENTS


def full_prompt_pool() -> tuple[str, ...]:
    """The 70-prompt catalog: 20 styles plus 50 object prompts."""
    objects = tuple(object_prompt(n) for n in IRRELEVANT_OBJECTS + RELEVANT_OBJECTS)
    return style_prompt_pool() + objects
