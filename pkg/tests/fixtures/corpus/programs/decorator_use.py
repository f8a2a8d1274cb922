import heavylib


@heavylib.decorate
def handler(x):
    return heavylib.crunch(x)


def main():
    print(handler("dec"))


if __name__ == "__main__":
    main()
