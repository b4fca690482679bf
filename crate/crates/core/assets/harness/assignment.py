def find_duplicates(items):
    """Return the values that appear more than once, in first-seen order."""
    duplicates = []
    for i in range(len(items)):
        for j in range(len(items)):
            if items[i] == items[j] and items[i] not in duplicates:
                duplicates.append(items[i])
    return duplicates


def median(values):
    ordered = sorted(values)
    middle = len(ordered) / 2
    return ordered[middle]
