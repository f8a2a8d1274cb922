import heavylib, lightlib


def heavy(x):
    return heavylib.crunch(x)


def light(x):
    return lightlib.ping() + x


def main():
    print(heavy("h"))
    print(light("l"))


if __name__ == "__main__":
    main()
