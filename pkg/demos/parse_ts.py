"""Reading the UCR/UEA .ts text format: variable lengths and missing values."""

from pdftime import ParseError, parse_ts

text = """# two channels, ragged lengths, one gap
@problemName Demo
@timeStamps false
@missing true
@univariate false
@dimensions 2
@equalLength false
@classLabel true up down
@data
1,2,3,4:4,3,2,1:up
0.5,?,1.5:2,2,2:down
"""
ds = parse_ts(text)
print("shape (n, V, L):", ds.X.shape, "classes:", ds.class_names, "labels:", ds.y.tolist())
print(ds.X[1])

try:
    parse_ts(text.replace("0.5,?,1.5", "0.5,x,1.5"))
except ParseError as err:
    print("malformed input:", err)
