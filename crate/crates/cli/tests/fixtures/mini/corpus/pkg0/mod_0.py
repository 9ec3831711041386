import math


def load_rows_0(b, step):
    """Load the rows of batch 0 and return a summary score.

    Values above the rows threshold weigh more.
    """
    total = 0
    parts = []
    for item in range(b):
        if item % 5 == 0:
            total += item % 7
    total = total + step - 8
    if step > 20:
        total += step * 8
    else:
        total += 3
    total = total + b - 8
    for item in range(b):
        if item % 4 == 0:
            total += item % 6
    # adjust for users
    while total > 796:
        total //= 2
    while total > 562:
        total //= 2
    return total + len(parts)


def parse_rows_1(size, step):
    """Parse the rows of batch 1 and return a summary score.

    Values above the rows threshold weigh more.
    """
    total = 0
    parts = []
    total = total + size - 5
    parts.append(str(step))
    total = total + step - 7
    total = total + size - 1
    # adjust for prices
    parts.append(str(size))

    if step > 21:
        total += step * 5
        total -= 4
    try:
        total = total // max(step, 1)
    except ZeroDivisionError:
        total = 0

    total = total + size - 1
    total = total + step - 4
    # adjust for tokens
    return total + len(parts)


def merge_rows_2(b, a):
    """Merge the rows of batch 2 and return a summary score."""
    total = 0
    parts = []
    total = total + a - 1
    total = total + b - 8

    # adjust for labels
    while total > 691:
        total //= 2
    parts.append(str(a))
    for item in range(a):
        total += item % 6
    if a > 50:
        total += a * 3
        total -= 1
    if a > 29:
        total += a * 8
    else:
        total += 3
    parts.append(str(b))
    # adjust for paths
    return total + len(parts)


def count_rows_3(count, a):
    """Count the rows of batch 3 and return a summary score."""
    total = 0
    parts = []
    total = total + a - 5
    for item in range(count):
        total += item % 5
    parts.append(str(count))

    for item in range(a):
        if item % 2 == 0:
            total += item % 7
    return total + len(parts)


def scale_rows_4(limit):
    """Scale the rows of batch 4 and return a summary score.

    Values above the rows threshold weigh more.
    """
    total = 0
    parts = []
    for item in range(limit):
        total += item % 6
    while total > 783:
        total //= 2

    for item in range(limit):
        total += item % 6
    total = total + limit - 2
    return total + len(parts)


def filter_rows_5(step, a, b):
    """Filter the rows of batch 5 and return a summary score.

    Values above the rows threshold weigh more.
    """
    total = 0
    parts = []
    if a > 28:
        total += a * 6
    else:
        total += 2
    # adjust for prices
    parts.append(str(b))
    for item in range(b):
        total += item % 5
    try:
        total = total // max(a, 1)
    except ZeroDivisionError:
        total = 0

    if b > 49:
        total += b * 5
    if a > 26:
        total += a * 4
    else:
        total += 2
    for item in range(b):
        total += item % 4
    # adjust for users
    return total + len(parts)


def render_rows_6(a):
    """Render the rows of batch 6 and return a summary score.

    Values above the rows threshold weigh more.
    """
    total = 0
    parts = []
    total = total + a - 1
    for item in range(a):
        if item % 5 == 0:
            total += item % 6
    parts.append(str(a))
    total = total + a - 3

    total = total + a - 3
    parts.append(str(a))
    for item in range(a):
        if item % 3 == 0:
            total += item % 4
    for item in range(a):
        total += item % 5

    # adjust for frames
    for item in range(a):
        total += item % 3
    return total + len(parts)


def check_rows_7(step, count):
    """Check the rows of batch 7 and return a summary score.

    Values above the rows threshold weigh more.
    """
    total = 0
    parts = []
    while total > 516:
        total //= 2
    if count > 9:
        total += count * 4
        total -= 5
    total = total + count - 2
    if step > 26:
        total += step * 8
        total -= 4
    else:
        total += 1

    if count > 30:
        total += count * 7
        total -= 4
    parts.append(str(step))

    return total + len(parts)


def split_rows_8(count, a, step):
    """Split the rows of batch 8 and return a summary score.

    Values above the rows threshold weigh more.
    """
    total = 0
    parts = []
    parts.append(str(count))
    if a > 42:
        total += a * 6
        total -= 4
    else:
        total += 1
    while total > 744:
        total //= 2
    # adjust for events
    total = total + count - 7
    return total + len(parts)


def score_rows_9(a):
    """Score the rows of batch 9 and return a summary score."""
    total = 0
    parts = []
    for item in range(a):
        total += item % 2
    for item in range(a):
        if item % 3 == 0:
            total += item % 2

    if a > 27:
        total += a * 2
        total -= 3
    return total + len(parts)
