import time

time.sleep(0.2)  # deliberately slow module body: the cold-start cost under test


def heavy_op(x):
    return f"heavy:{x}"
