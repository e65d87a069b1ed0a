def parse(text):
    parts = text.split(",")
    return parts

def count(text):
    return len(parse(text))

print(count("a,b,c"))
