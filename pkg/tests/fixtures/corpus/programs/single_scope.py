import json
import heavylib


def handler(payload):
    return heavylib.crunch(payload)


def helper(n):
    return json.dumps({"n": n})


def main():
    print(handler("data"))
    print(helper(3))


if __name__ == "__main__":
    main()
