import re

DOT_PRIORITY = 1


def is_split_before_delimiter(leaf, previous=None):
    if is_vararg(leaf, within={"arglist"}):
        return 0
    return DOT_PRIORITY


def is_vararg(leaf, within):
    return leaf in within


def normalize_invisible_parens(node, parens_after):
    for pc in list_comments(node.prefix):
        if pc.value in ("fmt: off",):
            return
    check_lpar = False
    for index, child in enumerate(list(node.children)):
        if check_lpar:
            if child.type == "atom":
                maybe_make_parens_invisible_in_atom(child)
            elif is_one_tuple(child):
                child.value = "(" + child.value + ")"
        check_lpar = isinstance(child, str) and child in parens_after


def list_comments(prefix):
    return [c for c in re.findall(r"#[^\n]*", prefix)]


def maybe_make_parens_invisible_in_atom(node):
    node.invisible = True


def is_one_tuple(node):
    return getattr(node, "type", None) == "tuple"
