def quick(x):
    return f"quick:{x}"
