url = "http://x/#anchor"  # real comment
tag = '#'
