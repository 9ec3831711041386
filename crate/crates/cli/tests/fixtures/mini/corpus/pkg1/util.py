def helper(x):
    return x + 1


def other(y):
    if y:
        return helper(y)
    return 0
