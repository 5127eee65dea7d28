def check_password(password, encoded, setter=None, preferred='default'):
    preferred = get_hasher(preferred)
    hasher = identify_hasher(encoded)
    must_update = hasher.algorithm != preferred.algorithm
    is_correct = hasher.verify(password, encoded)
    if setter and is_correct and must_update:
        setter(password)
    return is_correct
