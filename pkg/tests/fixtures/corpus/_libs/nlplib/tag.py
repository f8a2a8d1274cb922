def tag_text(text):
    return f"tag({text})"
