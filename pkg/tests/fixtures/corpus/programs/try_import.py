try:
    import heavylib
except ImportError:
    heavylib = None


def maybe(x):
    if heavylib is None:
        return "absent"
    return heavylib.crunch(x)


def main():
    print(maybe("guarded"))


if __name__ == "__main__":
    main()
