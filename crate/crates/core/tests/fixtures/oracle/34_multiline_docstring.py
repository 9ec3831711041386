def area(r):
    """Area of a circle.

    Uses pi to five places.
    """
    return 3.14159 * r * r
