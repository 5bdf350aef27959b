CLASSES = ("heron", "ibis")
M_RANDOM = 9  # random crops per image; plans also prepend the full rect
