key = lambda item: item[1] if item else None
pairs.sort(key=key)
