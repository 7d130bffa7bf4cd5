void s452(int n, int *a, int *b, int *c) {
    for (int i = 0; i < n; i++) {
        a[i] = b[i] + c[i] * i;
    }
}
