void s172(int n, int xa, int xb, int *a, int *b) {
    for (int i = xa - 1; i < n; i += xb) {
        a[i] += b[i];
    }
}
