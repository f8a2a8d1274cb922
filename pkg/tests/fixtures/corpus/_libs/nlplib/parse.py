def parse_text(text):
    return f"parse({text})"
