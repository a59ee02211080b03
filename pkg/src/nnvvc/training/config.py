"""Plain-text ``key = value`` training configs and content hashes."""
import ast
import dataclasses
import hashlib


def parse_value(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def read_config(path, cls):
    """Build dataclass ``cls`` from a key=value file; unknown keys are errors."""
    names = {f.name for f in dataclasses.fields(cls)}
    kw = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in names:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            kw[key] = parse_value(value)
    return cls(**kw)


def config_text(cfg):
    return "".join(f"{f.name} = {getattr(cfg, f.name)!r}\n" for f in dataclasses.fields(cfg))


def write_config(path, cfg):
    with open(path, "w") as f:
        f.write(config_text(cfg))


def config_hash(*cfgs):
    h = hashlib.sha256()
    for c in cfgs:
        h.update((type(c).__name__ + "\n" + config_text(c)).encode())
    return h.hexdigest()[:16]
