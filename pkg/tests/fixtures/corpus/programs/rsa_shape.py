import nlplib.core
import nlplib.sem
import nlplib.stem
import nlplib.parse
import nlplib.tag


def classify(text):
    tokens = nlplib.core.tokenize(text)
    return len(tokens)


def deep_semantics(text):
    return nlplib.sem.analyze(text)


def stemmed(word):
    return nlplib.stem.reduce_word(word)


def parsed(text):
    return nlplib.parse.parse_text(text)


def tagged(word):
    return nlplib.tag.tag_text(word)


def main():
    print(classify("a b c"))
    print(deep_semantics("x"))
    print(stemmed("running"))
    print(parsed("s"))
    print(tagged("w"))


if __name__ == "__main__":
    main()
