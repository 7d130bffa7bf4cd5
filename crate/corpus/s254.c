void s254(int n, int *a, int *b) {
    int x;
    x = b[n - 1];
    for (int i = 0; i < n; i++) {
        a[i] = (b[i] + x) / 2;
        x = b[i];
    }
}
