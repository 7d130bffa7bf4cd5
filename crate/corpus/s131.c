void s131(int n, int *a, int *b) {
    int m = 1;
    for (int i = 0; i < n - 1; i++) {
        a[i] = a[i + m] + b[i];
    }
}
