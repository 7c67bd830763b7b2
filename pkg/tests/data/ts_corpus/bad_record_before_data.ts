@problemName Early
@univariate true
@classLabel true a b
1,2,3:a
@data
1,2,3:b
