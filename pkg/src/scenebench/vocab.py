"""Event class vocabulary and fixed experimental grid levels."""

CLASS_LABELS = (
    "door knock",
    "door slam",
    "speech",
    "laugh",
    "throat",
    "cough",
    "drawer",
    "keyboard",
    "keys",
    "phone",
    "page turn",
)

EBR_LEVELS_DB = (-6, 0, 6)
NEC_LEVELS = {False: (1, 2, 3), True: (3, 4, 5)}
SCENE_DURATION = 120.0
SAMPLE_RATE = 44100
REPLICATIONS = {"dev": 1, "test": 3}


def is_known_label(label: str) -> bool:
    return label in CLASS_LABELS
