CONFIG = {
    "a": 1,  # first
    # gap
    "b": 2,
}
