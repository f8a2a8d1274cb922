def mash(x):
    return f"mash:{x}"
