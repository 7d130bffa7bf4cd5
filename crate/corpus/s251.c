void s251(int n, int *a, int *b, int *c, int *d) {
    int s;
    for (int i = 0; i < n; i++) {
        s = b[i] + c[i] * d[i];
        a[i] = s * s;
    }
}
