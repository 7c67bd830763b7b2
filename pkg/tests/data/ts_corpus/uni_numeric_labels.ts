@problemName NumericLabels
@univariate true
@equalLength true
@seriesLength 4
@classLabel true 1 2 3
@data
0.5,1.5,2.5,3.5:3
-1.0,0.0,1.0,2.0:1
1e-3,2e-3,3e-3,4e-3:2
7,7,7,7:1
