def grade(s):
    if s >= 90:
        g = "A"
    elif s >= 80:
        g = "B"
    elif s >= 70:
        g = "C"
    else:
        g = "F"
    return g + ("+" if s % 10 >= 7 else "")
