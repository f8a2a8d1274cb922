def reduce_word(word):
    return f"stem({word})"
